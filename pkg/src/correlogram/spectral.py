"""Exact second-order theory of the normalized estimation error.

Everything here is deterministic quadrature, no simulation: the Fejér
kernel, the spectral pseudometric sigma, the limiting covariance

    C_inf(t1, t2) = (1/2pi) int [ e^{i(t1-t2)lam} |H*(lam)|^2
                                 + e^{i(t1+t2)lam} (H*(lam))^2 ] dlam,

the finite-horizon covariance of Zhat (a double spectral integral
carrying the Fejér factor), and the pseudometric rho with its explicit
upper bound.

The finite-horizon integral is reduced to one outer variable
u = lam1 - lam2, where the Fejér factor Phi_T(u) concentrates on
|u| = O(1/T):

    cov = (1/2pi c^2) int Phi_T(u) [ F1(u) + e^{-i t2 u} G(u) ] du,
    F1(u) = int e^{i(t1-t2)lam} |H*(lam)|^2 |g*(lam-u)|^2 dlam,
    G(u)  = int e^{i(t1+t2)lam} H*(lam) H*(lam-u) g*(lam) g*(lam-u) dlam.

Near u=0 the integrand is resolved directly with Gauss-Legendre panels
of width ~pi/T; beyond, Phi_T(u) = (1/pi T)(1 - cos(Tu))/u^2 is split
into a smooth part and an oscillatory part handled by Filon-Legendre
quadrature (Legendre expansion of the slow factor against analytic
moments int P_n(x) e^{icx} dx = 2 i^n j_n(c)). The u integral runs over
both half-lines with no symmetry shortcuts, so the imaginary residue
and the (t1, t2)-swap asymmetry are genuine numerical consistency
checks, reported and enforced.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import sici, spherical_jn

from .errors import ConsistencyError
from .kernels import Kernel

__all__ = [
    "QuadratureSettings",
    "CovarianceModel",
    "fejer",
    "fejer_l1_norm",
    "sigma",
    "msq_increment_Y",
    "cov_limit",
    "cov_finite",
    "cov_finite_detail",
    "cov_matrix",
    "rho_exact",
    "rho_upper",
    "rho_upper_uniform",
    "dZ_bound_check",
    "write_cov_matrix_csv",
]


@dataclass(frozen=True)
class QuadratureSettings:
    """Shared quadrature controls.

    ``lambda_max`` truncates spectral integrals for kernels without a hard
    band limit; band-limited kernels ignore it. ``rule`` selects between
    scipy's adaptive integrator and fixed composite Gauss-Legendre panels
    for the one-dimensional quantities (the double integral always uses
    the panel scheme described in the module docstring).
    """

    lambda_max: float = 200.0
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    rule: str = "adaptive"

    def __post_init__(self):
        if not (self.lambda_max > 0 and self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("lambda_max and tolerances must be positive")
        if self.rule not in ("adaptive", "fixed-grid"):
            raise ValueError("rule must be 'adaptive' or 'fixed-grid'")

    @classmethod
    def default_1d(cls) -> "QuadratureSettings":
        return cls(abs_tol=1e-9, rel_tol=1e-9)

    @classmethod
    def default_2d(cls) -> "QuadratureSettings":
        return cls(abs_tol=1e-6, rel_tol=1e-6)


@dataclass(frozen=True)
class CovarianceModel:
    """Kernel pair and quadrature controls for covariance queries."""

    h: Kernel
    g: Optional[Kernel] = None
    c: float = 1.0
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings.default_2d)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.g is not None:
            gc = self.g.params.get("c")
            if gc is not None and not math.isclose(gc, self.c, rel_tol=1e-12):
                raise ValueError(
                    f"model c={self.c} does not match the window constant c={gc}"
                )


def fejer(T: float, lam) -> float:
    """Fejér kernel ``(1/2piT)(sin(T lam/2)/(lam/2))^2``; T/(2pi) at 0."""
    if not T > 0:
        raise ValueError("T must be positive")
    lam = np.asarray(lam, dtype=float)
    out = (T / (2.0 * math.pi)) * np.sinc(T * lam / (2.0 * math.pi)) ** 2
    return out.item() if lam.ndim == 0 else out


def fejer_l1_norm(T: float, settings: Optional[QuadratureSettings] = None) -> float:
    """L1 norm of the Fejér kernel (equals 1 exactly).

    Substituting x = T*lam/2 removes T, leaving
    (2/pi) int_0^inf (sin x / x)^2 dx; the head is integrated numerically
    and the tail beyond X uses
    int_X^inf sin^2 x / x^2 dx = sin^2(X)/X + pi/2 - Si(2X).
    """
    if not T > 0:
        raise ValueError("T must be positive")
    X = 50.0 * math.pi
    head, _ = quad(lambda x: (math.sin(x) / x) ** 2 if x else 1.0, 0.0, X, limit=400)
    si_2x, _ = sici(2.0 * X)
    tail = math.sin(X) ** 2 / X + math.pi / 2.0 - si_2x
    return (2.0 / math.pi) * (head + tail)


# ---------------------------------------------------------------------------
# spectral truncation helpers


def _ftf_abs(k: Kernel):
    env = k.ftf_envelope
    if env is not None:
        return env
    return lambda lam: np.abs(k.ftf_eval(lam))


def _spectral_tail_mass(k: Kernel, L: float) -> float:
    """Upper bound on int_{|lam|>L} |k*(lam)|^2 dlam via the envelope."""
    env = _ftf_abs(k)
    val, _ = quad(lambda t: float(env(L / t)) ** 2 * L / t**2, 0.0, 1.0, limit=200)
    return 2.0 * val


def _spectral_window(k: Kernel, abs_mass_tol: float, start: float) -> float:
    """One-sided L with squared-transform tail mass below ``abs_mass_tol``."""
    if k.band_limit is not None:
        return k.band_limit
    L = max(start, 1.0)
    for _ in range(80):
        if _spectral_tail_mass(k, L) < abs_mass_tol:
            return L
        L *= 1.5
    return L


def _ftf_breakpoints(k: Kernel) -> tuple:
    """Points where the transform may jump or kink."""
    pts = [0.0]
    if k.band_limit is not None:
        pts.extend([-k.band_limit, k.band_limit])
    return tuple(pts)


def _ftf_osc_rate(k: Kernel) -> float:
    """Crude bound on the transform's variation rate in lam.

    A kernel supported within radius R has a transform varying on scale
    1/R at most, so R bounds the phase rate. Band-limited transforms are
    flat inside their band (rate 0 apart from the tabulated jumps).
    """
    if k.band_limit is not None:
        return 0.0
    return k.effective_support


def _sup_ftf(k: Kernel) -> float:
    env = _ftf_abs(k)
    grid = np.linspace(0.0, k.band_limit if k.band_limit else 50.0, 512)
    return float(np.max(np.asarray(env(grid), dtype=float)))


# ---------------------------------------------------------------------------
# one-dimensional quantities

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)
_LEG_VANDER = np.polynomial.legendre.legvander(_GL_NODES, 11)  # P_n(x_k), (12, 12)
_LEG_PROJ = ((2.0 * np.arange(12) + 1.0) / 2.0)[:, None] * (_LEG_VANDER.T * _GL_WEIGHTS)


def _fixed_grid_1d(f, lo: float, hi: float, points, max_width: float) -> complex:
    """Composite 12-point Gauss-Legendre over breakpoint-aware panels."""
    cuts = [lo, hi] + [p for p in (points or ()) if lo < p < hi]
    edges = []
    cuts = sorted(set(cuts))
    for a, b in zip(cuts, cuts[1:]):
        m = max(1, int(math.ceil((b - a) / max_width)))
        edges.extend(np.linspace(a, b, m + 1)[:-1])
    edges.append(hi)
    edges = np.asarray(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    hw = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + hw[:, None] * _GL_NODES[None, :]).ravel()
    w = (hw[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return complex(np.sum(w * f(nodes)))


def _integrate_1d(f, lo, hi, settings: QuadratureSettings, points=None) -> complex:
    if settings.rule == "fixed-grid":
        return _fixed_grid_1d(f, lo, hi, points, max_width=0.25)
    re, _ = quad(
        lambda x: f(np.asarray(x)).real.item(),
        lo,
        hi,
        points=points,
        limit=400,
        epsabs=settings.abs_tol / 4,
        epsrel=settings.rel_tol,
    )
    im, _ = quad(
        lambda x: f(np.asarray(x)).imag.item(),
        lo,
        hi,
        points=points,
        limit=400,
        epsabs=settings.abs_tol / 4,
        epsrel=settings.rel_tol,
    )
    return complex(re, im)


def sigma(h: Kernel, tau: float, settings: Optional[QuadratureSettings] = None) -> float:
    """Spectral pseudometric ``[int |H*(lam)|^2 sin^2(tau lam/2) dlam]^{1/2}``."""
    settings = settings or QuadratureSettings.default_1d()
    tau = float(tau)
    if tau == 0.0:
        return 0.0
    L = _spectral_window(h, abs_mass_tol=settings.abs_tol, start=settings.lambda_max)
    pts = [p for p in _ftf_breakpoints(h) if p > 0]

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return (np.abs(h.ftf_eval(lam)) ** 2 * np.sin(tau * lam / 2.0) ** 2).astype(complex)

    val = 2.0 * _integrate_1d(f, 0.0, L, settings, points=pts or None).real
    return math.sqrt(max(val, 0.0))


def msq_increment_Y(
    h: Kernel, tau1: float, tau2: float, settings: Optional[QuadratureSettings] = None
) -> float:
    """Mean-square output increment ``E|Y(t2)-Y(t1)|^2 = (2/pi) sigma^2``."""
    return (2.0 / math.pi) * sigma(h, abs(tau2 - tau1), settings) ** 2


def autocovariance_Y(
    h: Kernel, u: float, settings: Optional[QuadratureSettings] = None
) -> float:
    """Stationary covariance of the output, ``E Y(t+u) Y(t)``.

    Spectral form ``(1/pi) int_0^inf |H*(lam)|^2 cos(u lam) dlam``; even
    in u and equal to ||h||_2^2 at u = 0 whatever the kernel's parity.
    """
    settings = settings or QuadratureSettings.default_1d()
    u = float(u)
    L = _spectral_window(h, abs_mass_tol=settings.abs_tol, start=settings.lambda_max)
    pts = [p for p in _ftf_breakpoints(h) if p > 0]

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        return (np.abs(h.ftf_eval(lam)) ** 2 * np.cos(u * lam)).astype(complex)

    return _integrate_1d(f, 0.0, L, settings, points=pts or None).real / math.pi


def cov_limit(
    h: Kernel,
    tau1: float,
    tau2: float,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """Limiting covariance C_inf(tau1, tau2) of the error process.

    Integrates over both half-lines; the imaginary residue of the
    two-sided integral is a quadrature self-check, not assumed zero.
    """
    settings = settings or QuadratureSettings.default_1d()
    a = float(tau1) - float(tau2)
    b = float(tau1) + float(tau2)
    L = _spectral_window(h, abs_mass_tol=settings.abs_tol / 4, start=settings.lambda_max)
    pts = [p for p in _ftf_breakpoints(h) if -L < p < L]

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        hs = h.ftf_eval(lam)
        return np.exp(1j * a * lam) * np.abs(hs) ** 2 + np.exp(1j * b * lam) * hs**2

    val = _integrate_1d(f, -L, L, settings, points=pts or None) / (2.0 * math.pi)
    tol = settings.abs_tol + settings.rel_tol * abs(val.real)
    if abs(val.imag) > tol:
        raise ConsistencyError(
            f"limit covariance imaginary residue {val.imag:.3e} exceeds {tol:.3e}"
        )
    return val.real


# ---------------------------------------------------------------------------
# finite-horizon covariance (double spectral integral)


class _PairIntegrand:
    """Evaluator of F1(u) and G(u) on a breakpoint-aware lambda grid.

    The lambda ladder is built once: phase-capped panels inside the
    spectral core of H (where most of |H*|^2 lives), then panels growing
    geometrically through the mass tail out to the truncation point,
    never wider than the transforms' own oscillation scale. Per call the
    ladder is only augmented with the u-shifted breakpoints.
    """

    def __init__(self, model: CovarianceModel, tau1: float, tau2: float):
        h, g = model.h, model.g
        st = model.quadrature
        self.h, self.g = h, g
        self.a = tau1 - tau2
        self.b = tau1 + tau2
        g_sup = _sup_ftf(g)
        # absolute tail target for the lambda truncation of F1 and G
        lam_tail = 0.25 * st.abs_tol * 2.0 * math.pi * model.c**2 / max(g_sup**2, 1e-300)
        self.L = _spectral_window(h, abs_mass_tol=lam_tail, start=st.lambda_max)
        h_mass = 2.0 * math.pi * h.l2_norm**2
        self.L_core = _spectral_window(h, abs_mass_tol=1e-3 * h_mass, start=2.0)
        self.breaks = sorted(set(_ftf_breakpoints(h)) | set(_ftf_breakpoints(g)))
        self.osc_rate = max(_ftf_osc_rate(h), _ftf_osc_rate(g))
        rate = max(1.0, abs(self.a), abs(self.b), self.osc_rate)
        self.max_width = 2.0 / rate
        self._base_edges = self._build_base_edges()

    def _build_base_edges(self) -> np.ndarray:
        L, core = self.L, min(self.L_core + 2.0, self.L)
        w = self.max_width
        pts = [0.0]
        x = 0.0
        while x < core - 1e-12:
            x = min(x + w, core)
            pts.append(x)
        w_osc = 9.0 / self.osc_rate if self.osc_rate > 0 else math.inf
        while x < L - 1e-12:
            step = min(w + 0.35 * (x - core), w_osc)
            x = min(x + max(step, w), L)
            pts.append(x)
        pos = np.asarray(pts)
        return np.concatenate([-pos[:0:-1], pos])

    def __call__(self, u: float) -> tuple:
        """Return (F1(u), G(u)) as complex scalars."""
        L = self.L
        shifted = [p + u for p in self.breaks if -L < p + u < L]
        edges = np.union1d(self._base_edges, shifted) if shifted else self._base_edges
        mid = 0.5 * (edges[:-1] + edges[1:])
        hw = 0.5 * (edges[1:] - edges[:-1])
        lam = (mid[:, None] + hw[:, None] * _GL_NODES[None, :]).ravel()
        w = (hw[:, None] * _GL_WEIGHTS[None, :]).ravel()

        hs = self.h.ftf_eval(lam)
        hsu = self.h.ftf_eval(lam - u)
        gs = self.g.ftf_eval(lam)
        gsu = self.g.ftf_eval(lam - u)
        f1 = np.sum(w * np.exp(1j * self.a * lam) * np.abs(hs) ** 2 * np.abs(gsu) ** 2)
        gg = np.sum(w * np.exp(1j * self.b * lam) * hs * hsu * gs * gsu)
        return complex(f1), complex(gg)


def _filon_cos_moments(c: float) -> np.ndarray:
    """``int_{-1}^{1} P_n(x) e^{icx} dx = 2 i^n j_n(c)`` for n = 0..11."""
    jn = spherical_jn(np.arange(12), abs(c))
    mom = 2.0 * (1j ** np.arange(12)) * jn
    if c < 0:
        mom = np.conj(mom)
    return mom


def _u_panels(
    T: float, fine_end: float, u_top: float, phase_rate: float, tail_cap: float
) -> list:
    """Positive-u panel edges: a directly resolved head, then wider panels.

    Head panels have width ~pi/T (half a Fejér oscillation) out to
    u_A = 40pi/T; past the head, panel width is capped by the integrand's
    own phase rate out to ``fine_end`` (where the H(.)H(.-u) pair term has
    decayed), then grows geometrically, never exceeding ``tail_cap`` (the
    variation scale of the surviving slow factor).
    """
    u_A = min(40.0 * math.pi / T, max(fine_end, 1.0))
    w_head = min(math.pi / T, 0.25)
    n_head = max(1, int(math.ceil(u_A / w_head)))
    edges = list(np.linspace(0.0, u_A, n_head + 1))
    w_cap = min(0.25, 1.0 / phase_rate)
    u = edges[-1]
    fine_top = min(fine_end + 1.0, u_top)
    while u < fine_top:
        u = min(u + min(w_cap, u), fine_top)
        edges.append(u)
    while u < u_top:
        step = min(max(min(w_cap, u), 0.3 * u), tail_cap)
        u = min(u + step, u_top)
        edges.append(u)
    return edges


def _phi_smooth(T: float, u: np.ndarray) -> np.ndarray:
    """Fejér kernel without the cos(Tu) oscillation: (1/piT)/u^2 pieces
    are handled by the caller; this is the full kernel for the head."""
    return (T / (2.0 * math.pi)) * np.sinc(T * u / (2.0 * math.pi)) ** 2


def cov_finite_detail(
    model: CovarianceModel, T: float, tau1: float, tau2: float
) -> dict:
    """Finite-horizon covariance with its numerical self-checks.

    Returns a dict with ``value`` (the symmetrized real covariance),
    ``imag_residue`` (two-sided imaginary part that must cancel) and
    ``asymmetry`` (difference between the (tau1,tau2) and (tau2,tau1)
    accumulations, zero analytically).
    """
    if model.g is None:
        raise ValueError("finite-horizon covariance needs the window kernel g")
    if model.g.parity != "even":
        raise ValueError(
            "finite-horizon covariance is defined here for even real windows; "
            "complex-transform windows have no fixed convention"
        )
    if not T > 0:
        raise ValueError("T must be positive")
    st = model.quadrature
    tau1, tau2 = float(tau1), float(tau2)
    pair = _PairIntegrand(model, tau1, tau2)
    L = pair.L
    h, g = model.h, model.g

    # outer truncation: envelope of |F1| + |G| against the Fejér tail
    env_g = _ftf_abs(g)
    env_h = _ftf_abs(h)
    g_sup = _sup_ftf(g)
    h_mass = 2.0 * math.pi * h.l2_norm**2

    def s_env(u_arr):
        x = np.maximum(np.asarray(u_arr, dtype=float) - L, 0.0)
        eg = np.asarray(env_g(x), dtype=float)
        if h.band_limit is not None:
            pair_alive = (np.asarray(u_arr) <= 2.0 * h.band_limit).astype(float)
        else:
            pair_alive = np.asarray(env_h(x), dtype=float) / max(float(env_h(0.0)), 1e-300)
        return h_mass * eg * (eg + g_sup * pair_alive)

    tail_target = 0.05 * st.abs_tol * 2.0 * math.pi * model.c**2
    u_top = 2.0 * L + 2.0
    for _ in range(80):
        pts = u_top * 1.35 ** np.arange(41)
        widths = np.diff(pts)
        vals = (2.0 / (math.pi * T * pts[:-1] ** 2)) * s_env(pts[:-1])
        if float(np.sum(vals * widths)) < tail_target:
            break
        u_top *= 1.4
    phase_rate = max(1.0, abs(tau1), abs(tau2), _ftf_osc_rate(g), _ftf_osc_rate(h))
    fine_end = 2.0 * pair.L_core
    rate_g = _ftf_osc_rate(g)
    tail_cap = 9.0 / rate_g if rate_g > 0 else math.inf
    edges = _u_panels(T, fine_end, u_top, phase_rate, tail_cap)
    u_A = min(40.0 * math.pi / T, max(fine_end, 1.0))

    total12 = 0.0 + 0.0j
    total21 = 0.0 + 0.0j
    inv_piT = 1.0 / (math.pi * T)
    for lo, hi in zip(edges, edges[1:]):
        m = 0.5 * (lo + hi)
        hw = 0.5 * (hi - lo)
        for sign in (1.0, -1.0):
            # mirrored panel [-hi, -lo] when sign < 0
            u_nodes = sign * (m + hw * _GL_NODES)
            f1 = np.empty(u_nodes.size, dtype=complex)
            gg = np.empty(u_nodes.size, dtype=complex)
            for i, u in enumerate(u_nodes):
                f1[i], gg[i] = pair(float(u))
            s12 = f1 + np.exp(-1j * tau2 * u_nodes) * gg
            s21 = np.conj(f1) + np.exp(-1j * tau1 * u_nodes) * gg
            if hi <= u_A + 1e-12:
                phi = _phi_smooth(T, u_nodes)
                total12 += hw * np.sum(_GL_WEIGHTS * phi * s12)
                total21 += hw * np.sum(_GL_WEIGHTS * phi * s21)
            else:
                q12 = s12 / u_nodes**2
                q21 = s21 / u_nodes**2
                # smooth part (1/piT) int q du
                total12 += inv_piT * hw * np.sum(_GL_WEIGHTS * q12)
                total21 += inv_piT * hw * np.sum(_GL_WEIGHTS * q21)
                # oscillatory part -(1/piT) int cos(Tu) q du via Filon
                a12 = _LEG_PROJ @ q12
                a21 = _LEG_PROJ @ q21
                mom_p = _filon_cos_moments(T * hw * sign)
                mom_m = np.conj(mom_p)
                ph = np.exp(1j * T * m * sign)
                cos12 = 0.5 * hw * (ph * np.dot(a12, mom_p) + np.conj(ph) * np.dot(a12, mom_m))
                cos21 = 0.5 * hw * (ph * np.dot(a21, mom_p) + np.conj(ph) * np.dot(a21, mom_m))
                total12 -= inv_piT * cos12
                total21 -= inv_piT * cos21

    scale = 1.0 / (2.0 * math.pi * model.c**2)
    c12 = scale * total12
    c21 = scale * total21
    value = 0.5 * (c12.real + c21.real)
    imag_residue = max(abs(c12.imag), abs(c21.imag))
    asymmetry = abs(c12.real - c21.real)
    return {
        "value": value,
        "imag_residue": imag_residue,
        "asymmetry": asymmetry,
        "u_top": u_top,
        "lambda_window": L,
    }


def cov_finite(model: CovarianceModel, T: float, tau1: float, tau2: float) -> float:
    """Covariance of (Zhat(tau1), Zhat(tau2)) at horizon T.

    Symmetric in its lag arguments and real within the configured
    tolerance; violations raise, small negative variances (tau1 == tau2)
    are clamped to zero when within rounding slack.
    """
    st = model.quadrature
    detail = cov_finite_detail(model, T, tau1, tau2)
    value = detail["value"]
    tol = st.abs_tol + st.rel_tol * abs(value)
    if detail["imag_residue"] > tol:
        raise ConsistencyError(
            f"imaginary residue {detail['imag_residue']:.3e} exceeds {tol:.3e} "
            f"at T={T}, taus=({tau1}, {tau2})"
        )
    if detail["asymmetry"] > tol:
        raise ConsistencyError(
            f"lag-swap asymmetry {detail['asymmetry']:.3e} exceeds {tol:.3e} "
            f"at T={T}, taus=({tau1}, {tau2})"
        )
    if tau1 == tau2 and value < 0.0:
        if value < -st.abs_tol:
            raise ConsistencyError(
                f"variance {value:.3e} negative beyond rounding slack at tau={tau1}"
            )
        value = 0.0
    return value


def cov_matrix(model: CovarianceModel, T: float, taus: Sequence[float]) -> np.ndarray:
    """Symmetric covariance matrix of Zhat over a lag grid."""
    taus = [float(t) for t in taus]
    n = len(taus)
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = cov_finite(model, T, taus[i], taus[j])
    return out


def rho_exact(model: CovarianceModel, T: float, tau1: float, tau2: float) -> float:
    """Mean-square distance of Zhat increments,
    ``sqrt(Var Zhat(t1) + Var Zhat(t2) - 2 Cov)``, clamped at 0."""
    st = model.quadrature
    v11 = cov_finite(model, T, tau1, tau1)
    v22 = cov_finite(model, T, tau2, tau2)
    v12 = cov_finite(model, T, tau1, tau2)
    sq = v11 + v22 - 2.0 * v12
    if sq < -3.0 * st.abs_tol:
        raise ConsistencyError(
            f"negative squared increment {sq:.3e} at taus=({tau1}, {tau2})"
        )
    return math.sqrt(max(sq, 0.0))


def rho_upper(
    h: Kernel,
    g_family_sup: float,
    c: float,
    tau1: float,
    tau2: float,
    settings: Optional[QuadratureSettings] = None,
) -> float:
    """Horizon-free upper bound on the increment pseudometric:

        rho <= (1/c) * ((4/pi) ||H*||_2)^{1/2} * sup|g*| * sqrt(sigma).

    The constant (4/pi) is what the covariance decomposition actually
    yields: each of its two terms is bounded by (2/pi) sigma^2 sup|g*|^2
    (Fejér unit mass plus Cauchy-Schwarz), and sigma <= ||H*||_2^{1/2}
    sqrt(sigma) closes the bound.
    """
    if not (c > 0 and g_family_sup >= 0):
        raise ValueError("c must be positive and g_family_sup nonnegative")
    s = sigma(h, tau2 - tau1, settings)
    ftf_l2 = math.sqrt(2.0 * math.pi) * h.l2_norm
    return (1.0 / c) * math.sqrt((4.0 / math.pi) * ftf_l2) * g_family_sup * math.sqrt(s)


def rho_upper_uniform(h: Kernel, g_family_sup: float, c: float) -> float:
    """Global bound sup rho <= (2 sqrt(2)/c) ||H||_2 sup|g*|, from
    Var Zhat <= 2 ||H||_2^2 sup|g*|^2 / c^2 and the increment inequality."""
    if not (c > 0 and g_family_sup >= 0):
        raise ValueError("c must be positive and g_family_sup nonnegative")
    return (2.0 * math.sqrt(2.0) / c) * h.l2_norm * g_family_sup


def dZ_bound_check(
    h: Kernel,
    tau1: float,
    tau2: float,
    settings: Optional[QuadratureSettings] = None,
) -> tuple:
    """Return (d_Z, bound) where d_Z is the limit-process increment norm
    and bound = (2/sqrt(pi)) sigma(tau1, tau2); enforces d_Z <= bound."""
    settings = settings or QuadratureSettings.default_1d()
    sq = (
        cov_limit(h, tau1, tau1, settings)
        + cov_limit(h, tau2, tau2, settings)
        - 2.0 * cov_limit(h, tau1, tau2, settings)
    )
    if sq < -3.0 * settings.abs_tol:
        raise ConsistencyError(f"negative squared increment {sq:.3e} of the limit process")
    d_z = math.sqrt(max(sq, 0.0))
    bound = (2.0 / math.sqrt(math.pi)) * sigma(h, tau2 - tau1, settings)
    if d_z > bound + 100.0 * settings.abs_tol:
        raise ConsistencyError(
            f"increment bound violated: d_Z={d_z:.12g} > (2/sqrt(pi))sigma={bound:.12g}"
        )
    return d_z, bound


def write_cov_matrix_csv(
    taus: Sequence[float],
    matrix: np.ndarray,
    file,
    settings: Optional[QuadratureSettings] = None,
    extra: Optional[dict] = None,
) -> None:
    """Covariance matrix to CSV with a JSON sidecar of settings."""
    file = Path(file)
    taus = [float(t) for t in taus]
    with open(file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["tau"] + [repr(t) for t in taus])
        for t, row in zip(taus, np.asarray(matrix)):
            w.writerow([repr(t)] + [repr(float(v)) for v in row])
    meta = dict(extra or {})
    if settings is not None:
        meta["quadrature"] = {
            "lambda_max": settings.lambda_max,
            "abs_tol": settings.abs_tol,
            "rel_tol": settings.rel_tol,
            "rule": settings.rule,
        }
    with open(file.with_suffix(".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
