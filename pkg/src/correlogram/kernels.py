"""Impulse-response kernels and averaging-window families.

A linear system driven by white noise is described here by two real
square-integrable impulse responses: a target component ``H`` that we want
to estimate, and a controlled window ``g_delta`` that concentrates around
the origin as ``delta`` grows. This module builds both kinds of kernel,
exposes their Fourier transforms (the convention is
``phi*(lam) = int exp(-i lam t) phi(t) dt``), and provides the
integrability and regularity checks that the estimation theory requires
of a window family:

(1a) each member is in L2,
(1b) each member is even,
(1c) the transforms are uniformly bounded over delta,
(1d) the transforms converge to the constant ``c`` uniformly on compacts.

Built-ins: triangular (Bartlett) and Laplace (two-sided exponential)
windows, the sinc kernel and its Hilbert transform, plus tabulated
kernels loaded from samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import sici

__all__ = [
    "Kernel",
    "KernelFamily",
    "ConditionReport",
    "WeightedSpectralCheck",
    "make_triangular",
    "make_laplace",
    "make_sinc",
    "make_hilbert_sinc",
    "make_tabulated",
    "make_one_sided_box",
    "load_kernel_csv",
    "triangular_family",
    "laplace_family",
    "one_sided_box_family",
    "family_from_name",
    "kernel_from_spec",
    "check_family_conditions",
    "check_weighted_spectral",
    "autocorrelation",
]

#: Relative L2 tail mass allowed outside [-R, R] when a truncation radius
#: is solved for (kernels with fast decay). Slowly decaying kernels store
#: the radius they actually achieve together with its tail mass.
DEFAULT_SUPPORT_TOL = 1e-10

#: Truncation radius used for the sinc family, whose 1/t decay makes the
#: default tolerance unreachable in the time domain. Spectral quantities
#: for these kernels never rely on time truncation (the transforms are
#: known in closed form); the radius only sizes simulation padding.
SINC_SUPPORT_RADIUS = 60.0

_PARITY_VALUES = ("even", "odd", "none")


def _as_float_array(x):
    return np.asarray(x, dtype=float)


def _scalar_ok(out, x):
    """Return a python scalar when the input was scalar."""
    if np.ndim(x) == 0:
        return out.item()
    return out


@dataclass(frozen=True)
class Kernel:
    """A real L2 impulse-response component.

    Attributes
    ----------
    name : str
        Identifier, e.g. ``"triangular"`` or ``"sinc"``.
    time_eval : callable
        Vectorized kernel value at time ``t`` (seconds).
    ftf_eval : callable
        Vectorized frequency transfer function at ``lam`` (rad/s),
        returned as complex.
    parity : str
        ``"even"``, ``"odd"`` or ``"none"``.
    l2_norm : float
        Cached L2 norm of ``time_eval``.
    effective_support : float
        Radius R with L2 tail mass outside [-R, R] below ``support_tol``
        (relative to the squared norm).
    support_tol : float
        The tail tolerance actually achieved by ``effective_support``.
    band_limit : float or None
        Exact one-sided frequency support when the transform vanishes
        outside [-band_limit, band_limit]; None otherwise.
    ftf_envelope : callable or None
        Optional nonincreasing bound on ``|ftf_eval|`` valid for
        ``lam >= 0``; used to size quadrature tails.
    params : dict
        Construction parameters (``delta``, ``c``, ...) for manifests.
    """

    name: str
    time_eval: Callable[[np.ndarray], np.ndarray]
    ftf_eval: Callable[[np.ndarray], np.ndarray]
    parity: str
    l2_norm: float
    effective_support: float
    support_tol: float = DEFAULT_SUPPORT_TOL
    band_limit: Optional[float] = None
    ftf_envelope: Optional[Callable[[np.ndarray], np.ndarray]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.parity not in _PARITY_VALUES:
            raise ValueError(f"parity must be one of {_PARITY_VALUES}")
        if not (self.l2_norm >= 0 and math.isfinite(self.l2_norm)):
            raise ValueError("l2_norm must be finite and nonnegative")
        if not (self.effective_support > 0 and math.isfinite(self.effective_support)):
            raise ValueError("effective_support must be finite and positive")

    def ftf_l2_norm(self) -> float:
        """L2 norm of the transform, via the Plancherel identity."""
        return math.sqrt(2.0 * math.pi) * self.l2_norm


@dataclass(frozen=True)
class KernelFamily:
    """A window family ``delta -> g_delta`` with its limit constant ``c``."""

    constructor: Callable[[float], Kernel]
    c: float
    family_name: str

    def __call__(self, delta: float) -> Kernel:
        return self.constructor(delta)


def _require_positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be finite and positive, got {value!r}")
    return value


def make_triangular(delta: float, c: float) -> Kernel:
    """Triangular (Bartlett) window of height ``c*delta`` on [-1/delta, 1/delta].

    Time domain ``c*delta*(1 - delta*|t|)`` inside the support; transform
    ``c * (sin(lam/(2 delta)) / (lam/(2 delta)))**2``.
    """
    delta = _require_positive("delta", delta)
    c = _require_positive("c", c)

    def time_eval(t):
        t = _as_float_array(t)
        out = c * delta * np.clip(1.0 - delta * np.abs(t), 0.0, None)
        return _scalar_ok(out, t)

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        x = lam / (2.0 * delta)
        core = np.sinc(x / np.pi) ** 2  # np.sinc is sin(pi y)/(pi y)
        out = (c * core).astype(complex)
        return _scalar_ok(out, lam)

    def ftf_envelope(lam):
        lam = _as_float_array(lam)
        a = np.abs(lam)
        big = a > 2.0 * delta
        out = np.where(big, (2.0 * delta / np.where(big, a, 1.0)) ** 2, 1.0) * c
        return _scalar_ok(out, lam)

    return Kernel(
        name="triangular",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity="even",
        l2_norm=c * math.sqrt(2.0 * delta / 3.0),
        effective_support=1.0 / delta,
        support_tol=0.0,
        ftf_envelope=ftf_envelope,
        params={"delta": delta, "c": c},
    )


def make_laplace(delta: float, c: float) -> Kernel:
    """Two-sided exponential (Laplace) window ``(c*delta/2) exp(-delta |t|)``.

    Transform ``c * delta**2 / (delta**2 + lam**2)``.
    """
    delta = _require_positive("delta", delta)
    c = _require_positive("c", c)

    def time_eval(t):
        t = _as_float_array(t)
        out = 0.5 * c * delta * np.exp(-delta * np.abs(t))
        return _scalar_ok(out, t)

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        out = (c * delta**2 / (delta**2 + lam**2)).astype(complex)
        return _scalar_ok(out, lam)

    def ftf_envelope(lam):
        lam = _as_float_array(lam)
        out = c * delta**2 / (delta**2 + lam**2)
        return _scalar_ok(out, lam)

    # Two-sided tail mass of the squared kernel is exp(-2 delta R) relative
    # to the total, so R solving exp(-2 delta R) = tol.
    radius = math.log(1.0 / DEFAULT_SUPPORT_TOL) / (2.0 * delta)
    return Kernel(
        name="laplace",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity="even",
        l2_norm=0.5 * c * math.sqrt(delta),
        effective_support=radius,
        support_tol=DEFAULT_SUPPORT_TOL,
        ftf_envelope=ftf_envelope,
        params={"delta": delta, "c": c},
    )


def _sinc_tail_mass(radius: float) -> float:
    """Two-sided L2 tail of sin(pi t)/(pi t) outside [-radius, radius].

    Uses int_X^inf sin(x)^2/x^2 dx = sin(X)^2/X + pi/2 - Si(2X).
    """
    x = math.pi * radius
    si_2x, _ = sici(2.0 * x)
    return (2.0 / math.pi) * (math.sin(x) ** 2 / x + math.pi / 2.0 - si_2x)


def _hilbert_sinc_tail_mass(radius: float) -> float:
    """Two-sided L2 tail of (1 - cos(pi t))/(pi t) outside [-radius, radius].

    Expands (1-cos x)^2 = 3/2 - 2 cos x + cos(2x)/2 and integrates each
    cos(a x)/x^2 term by parts against Si.
    """
    x = math.pi * radius

    def cos_over_sq(a):
        # int_X^inf cos(a u)/u^2 du = cos(a X)/X - a (pi/2 - Si(a X))
        si_ax, _ = sici(a * x)
        return math.cos(a * x) / x - a * (math.pi / 2.0 - si_ax)

    val = 1.5 / x - 2.0 * cos_over_sq(1.0) + 0.5 * cos_over_sq(2.0)
    return (2.0 / math.pi) * val


def make_sinc(support_radius: float = SINC_SUPPORT_RADIUS) -> Kernel:
    """Sinc kernel ``sin(pi t)/(pi t)`` with transform 1 on [-pi, pi].

    The 1/t decay makes tight time-domain truncation impractical, so the
    stored ``effective_support`` only reaches the tail mass recorded in
    ``support_tol``; frequency-domain formulas are exact.
    """
    support_radius = _require_positive("support_radius", support_radius)

    def time_eval(t):
        t = _as_float_array(t)
        out = np.sinc(t)
        return _scalar_ok(out, t)

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        out = (np.abs(lam) <= np.pi).astype(complex)
        return _scalar_ok(out, lam)

    return Kernel(
        name="sinc",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity="even",
        l2_norm=1.0,
        effective_support=support_radius,
        support_tol=_sinc_tail_mass(support_radius),
        band_limit=math.pi,
        ftf_envelope=lambda lam: _scalar_ok(
            (np.abs(_as_float_array(lam)) <= np.pi).astype(float), lam
        ),
        params={},
    )


def make_hilbert_sinc(support_radius: float = SINC_SUPPORT_RADIUS) -> Kernel:
    """Hilbert transform of the sinc kernel, ``(1 - cos(pi t))/(pi t)``.

    Transform is ``i*sign(lam)`` on [-pi, pi]; the kernel is odd with unit
    L2 norm. Same truncation caveat as ``make_sinc``.
    """
    support_radius = _require_positive("support_radius", support_radius)

    def time_eval(t):
        t = _as_float_array(t)
        denom = np.where(t == 0.0, 1.0, np.pi * t)
        out = np.where(t == 0.0, 0.0, (1.0 - np.cos(np.pi * t)) / denom)
        return _scalar_ok(np.asarray(out), t)

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        out = (1j * np.sign(lam)) * (np.abs(lam) <= np.pi)
        return _scalar_ok(np.asarray(out, dtype=complex), lam)

    return Kernel(
        name="hilbert_sinc",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity="odd",
        l2_norm=1.0,
        effective_support=support_radius,
        support_tol=_hilbert_sinc_tail_mass(support_radius),
        band_limit=math.pi,
        ftf_envelope=lambda lam: _scalar_ok(
            (np.abs(_as_float_array(lam)) <= np.pi).astype(float), lam
        ),
        params={},
    )


def make_one_sided_box(delta: float, c: float) -> Kernel:
    """Box window ``c*delta`` on [0, 1/delta): deliberately asymmetric.

    Fails the evenness condition (1b); used to exercise the family checks.
    """
    delta = _require_positive("delta", delta)
    c = _require_positive("c", c)

    def time_eval(t):
        t = _as_float_array(t)
        out = c * delta * ((t >= 0) & (t < 1.0 / delta)).astype(float)
        return _scalar_ok(out, t)

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        # int_0^{1/delta} c*delta*exp(-i lam t) dt
        x = lam / delta
        small = np.abs(x) < 1e-12
        xs = np.where(small, 1.0, x)
        out = np.where(small, c * (1.0 + 0j), c * (1.0 - np.exp(-1j * xs)) / (1j * xs))
        return _scalar_ok(np.asarray(out, dtype=complex), lam)

    return Kernel(
        name="one_sided_box",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity="none",
        l2_norm=c * math.sqrt(delta),
        effective_support=1.0 / delta,
        support_tol=0.0,
        params={"delta": delta, "c": c},
    )


_PARITY_GRID_POINTS = 1024
_PARITY_TOL = 1e-9


def _detect_parity(times: np.ndarray, values: np.ndarray, radius: float) -> str:
    grid = np.linspace(0.0, radius, _PARITY_GRID_POINTS)
    right = np.interp(grid, times, values, left=0.0, right=0.0)
    left = np.interp(-grid, times, values, left=0.0, right=0.0)
    scale = max(np.max(np.abs(values)), 1e-300)
    if np.max(np.abs(right - left)) <= _PARITY_TOL * scale:
        return "even"
    if np.max(np.abs(right + left)) <= _PARITY_TOL * scale:
        return "odd"
    return "none"


def make_tabulated(times: Sequence[float], values: Sequence[float]) -> Kernel:
    """Kernel from uniform samples; linear interpolation, zero outside.

    The transform is a zero-padded discrete Fourier transform of the
    samples scaled by the grid spacing, linearly interpolated between
    frequency bins; accuracy degrades as O(spacing**2).
    """
    times = _as_float_array(times)
    values = _as_float_array(values)
    if times.ndim != 1 or values.ndim != 1 or times.size != values.size:
        raise ValueError("times and values must be 1-D arrays of equal length")
    if times.size < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
        raise ValueError("times and values must be finite")
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12 * abs(dt)):
        raise ValueError("times must form a strictly increasing uniform grid")

    t_arr = times.copy()
    v_arr = values.copy()

    def time_eval(t):
        t = _as_float_array(t)
        out = np.interp(t, t_arr, v_arr, left=0.0, right=0.0)
        return _scalar_ok(out, t)

    # Zero-padded DFT of the samples; bin spacing 2*pi/(n_fft*dt). The
    # phase factor accounts for the grid starting at t_arr[0] rather than 0.
    n_fft = 1 << max(12, int(np.ceil(np.log2(8 * times.size))))
    freqs = 2.0 * np.pi * np.fft.fftfreq(n_fft, d=dt)
    spectrum = dt * np.fft.fft(v_arr, n=n_fft) * np.exp(-1j * freqs * t_arr[0])
    order = np.argsort(freqs)
    freqs_sorted = freqs[order]
    spec_sorted = spectrum[order]

    def ftf_eval(lam):
        lam = _as_float_array(lam)
        re = np.interp(lam, freqs_sorted, spec_sorted.real, left=0.0, right=0.0)
        im = np.interp(lam, freqs_sorted, spec_sorted.imag, left=0.0, right=0.0)
        out = re + 1j * im
        return _scalar_ok(np.asarray(out, dtype=complex), lam)

    # Exact L2 norm of the piecewise-linear interpolant.
    seg = (v_arr[:-1] ** 2 + v_arr[:-1] * v_arr[1:] + v_arr[1:] ** 2) / 3.0
    l2_sq = float(np.sum(seg) * dt)
    l2 = math.sqrt(max(l2_sq, 0.0))

    # The interpolant vanishes outside the sample grid, so the grid radius
    # is an exact support bound.
    radius = float(max(abs(t_arr[0]), abs(t_arr[-1])))
    parity = _detect_parity(t_arr, v_arr, radius)
    return Kernel(
        name="tabulated",
        time_eval=time_eval,
        ftf_eval=ftf_eval,
        parity=parity,
        l2_norm=l2,
        effective_support=radius,
        support_tol=0.0,
        params={"n_samples": int(times.size), "dt": float(dt)},
    )


def load_kernel_csv(path) -> Kernel:
    """Load a tabulated kernel from a two-column (time,value) CSV file.

    A single header row is skipped when its first field is not numeric.
    """
    times, values = [], []
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                t = float(row[0])
            except ValueError:
                if times:
                    raise ValueError(f"non-numeric row {row!r} in {path}")
                continue  # header
            times.append(t)
            values.append(float(row[1]))
    return make_tabulated(times, values)


def triangular_family(c: float) -> KernelFamily:
    return KernelFamily(lambda d: make_triangular(d, c), float(c), "triangular")


def laplace_family(c: float) -> KernelFamily:
    return KernelFamily(lambda d: make_laplace(d, c), float(c), "laplace")


def one_sided_box_family(c: float) -> KernelFamily:
    return KernelFamily(lambda d: make_one_sided_box(d, c), float(c), "one_sided_box")


_FAMILY_BUILDERS = {
    "triangular": triangular_family,
    "laplace": laplace_family,
    "one_sided_box": one_sided_box_family,
}


def family_from_name(name: str, c: float) -> KernelFamily:
    try:
        return _FAMILY_BUILDERS[name](c)
    except KeyError:
        raise ValueError(
            f"unknown window family {name!r}; known: {sorted(_FAMILY_BUILDERS)}"
        ) from None


def kernel_from_spec(spec: dict) -> Kernel:
    """Build a kernel from a config mapping like {"name": "triangular", "delta": 2, "c": 1}."""
    spec = dict(spec)
    name = spec.pop("name", None)
    if name == "triangular":
        return make_triangular(spec["delta"], spec["c"])
    if name == "laplace":
        return make_laplace(spec["delta"], spec["c"])
    if name == "sinc":
        return make_sinc(**spec)
    if name == "hilbert_sinc":
        return make_hilbert_sinc(**spec)
    if name == "one_sided_box":
        return make_one_sided_box(spec["delta"], spec["c"])
    if name == "tabulated":
        if "path" in spec:
            return load_kernel_csv(spec["path"])
        return make_tabulated(spec["times"], spec["values"])
    raise ValueError(f"unknown kernel name {name!r}")


@dataclass
class ConditionReport:
    """Outcome of the four window-family checks, with numeric evidence."""

    family_name: str
    deltas: list
    l2_ok: bool
    l2_norms: list
    even_ok: bool
    max_asymmetry: list
    sup_bounded: bool
    sup_ftf_per_delta: list
    sup_ftf_constant: float
    limit_ok: bool
    limit_deviation: list
    lambda_window: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.l2_ok and self.even_ok and self.sup_bounded and self.limit_ok

    def as_dict(self) -> dict:
        return {
            "family": self.family_name,
            "deltas": list(map(float, self.deltas)),
            "checks": {
                "l2_finite": {"passed": self.l2_ok, "l2_norms": self.l2_norms},
                "even": {"passed": self.even_ok, "max_asymmetry": self.max_asymmetry},
                "ftf_sup_bounded": {
                    "passed": self.sup_bounded,
                    "per_delta": self.sup_ftf_per_delta,
                    "constant": self.sup_ftf_constant,
                },
                "compact_limit": {
                    "passed": self.limit_ok,
                    "deviation_per_delta": self.limit_deviation,
                    "lambda_window": self.lambda_window,
                },
            },
            "tol": self.tol,
            "passed": self.passed,
        }


_EVEN_CHECK_POINTS = 512
_SUP_SCAN_POINTS = 4096


def check_family_conditions(
    family: KernelFamily,
    deltas: Sequence[float],
    lambda_window: float,
    tol: float = 1e-9,
) -> ConditionReport:
    """Evaluate conditions (1a)-(1d) for sampled members of a window family.

    Convergence in (1d) is operationalized as monotone decrease of the
    window-restricted deviation ``sup_{|lam|<=a} |g*(lam) - c|`` along the
    ascending delta ladder, with the final deviation below ``tol`` (a
    finite program cannot verify a limit). The sup in (1c) is taken over
    a wide scan grid and reported as evidence, not proof.
    """
    deltas = list(map(float, deltas))
    if not deltas:
        raise ValueError("deltas must be non-empty")
    if sorted(deltas) != deltas:
        raise ValueError("deltas must be ascending")
    if not lambda_window > 0:
        raise ValueError("lambda_window must be positive")

    members = [family(d) for d in deltas]

    l2_norms = [k.l2_norm for k in members]
    l2_ok = all(math.isfinite(v) for v in l2_norms)

    max_asym = []
    for k in members:
        r = k.effective_support
        grid = np.linspace(0.0, r, _EVEN_CHECK_POINTS)
        asym = np.max(np.abs(k.time_eval(grid) - k.time_eval(-grid)))
        max_asym.append(float(asym))
    even_ok = all(a <= tol for a in max_asym)

    # (1c): scan each transform densely out to several delta scales.
    sup_per_delta = []
    for k, d in zip(members, deltas):
        lam_hi = max(lambda_window, 20.0 * d, 100.0)
        grid = np.concatenate([
            np.linspace(0.0, 2.0 * lambda_window, _SUP_SCAN_POINTS // 2),
            np.geomspace(max(2.0 * lambda_window, 1e-3), lam_hi, _SUP_SCAN_POINTS // 2),
        ])
        vals = np.abs(k.ftf_eval(grid))
        sup_per_delta.append(float(np.max(vals)))
    sup_constant = max(sup_per_delta)
    sup_bounded = math.isfinite(sup_constant)

    # (1d): deviation from c on the compact window per delta.
    deviations = []
    win = np.linspace(-lambda_window, lambda_window, _SUP_SCAN_POINTS)
    for k in members:
        dev = np.max(np.abs(k.ftf_eval(win) - family.c))
        deviations.append(float(dev))
    # A finite ladder cannot certify a limit; the flag records monotone
    # decrease across the sampled deltas with the last deviation below tol.
    decreasing = all(b < a * (1.0 + 1e-12) for a, b in zip(deviations, deviations[1:]))
    limit_ok = decreasing and deviations[-1] < tol

    return ConditionReport(
        family_name=family.family_name,
        deltas=deltas,
        l2_ok=l2_ok,
        l2_norms=[float(v) for v in l2_norms],
        even_ok=even_ok,
        max_asymmetry=max_asym,
        sup_bounded=sup_bounded,
        sup_ftf_per_delta=sup_per_delta,
        sup_ftf_constant=float(sup_constant),
        limit_ok=limit_ok,
        limit_deviation=deviations,
        lambda_window=float(lambda_window),
        tol=float(tol),
    )


@dataclass(frozen=True)
class WeightedSpectralCheck:
    """Log-weighted spectral integral with a truncation-convergence flag."""

    value: float
    converged: bool
    relative_change: float


def check_weighted_spectral(
    k: Kernel,
    exponent: float,
    lambda_max: float,
    rel_tol: float = 1e-3,
) -> WeightedSpectralCheck:
    """Compute ``int_{-L}^{L} |k*(lam)|^2 ln(1+|lam|)**exponent dlam``.

    The convergence flag compares the value at ``lambda_max`` against the
    value at ``2*lambda_max``; a relative change below ``rel_tol`` is
    treated as evidence of a finite integral.
    """
    if not exponent > 1:
        raise ValueError("exponent must exceed 1")
    lambda_max = _require_positive("lambda_max", lambda_max)

    def weighted(lam):
        return np.abs(k.ftf_eval(lam)) ** 2 * np.log1p(np.abs(lam)) ** exponent

    def integral(upper):
        pts = None
        if k.band_limit is not None and k.band_limit < upper:
            pts = [k.band_limit]
        val, _ = quad(weighted, 0.0, upper, points=pts, limit=300)
        return 2.0 * val

    v1 = integral(lambda_max)
    v2 = integral(2.0 * lambda_max)
    denom = max(abs(v2), 1e-300)
    rel = abs(v2 - v1) / denom
    return WeightedSpectralCheck(value=v1, converged=bool(rel < rel_tol), relative_change=float(rel))


def _grow_until_tail_small(env, start: float, tol: float) -> float:
    """Smallest L (by doubling) with int_L^inf env(lam)^2 dlam below tol.

    The tail is computed through the substitution lam = L/u to keep the
    quadrature on a finite interval.
    """
    L = start
    for _ in range(60):
        tail, _ = quad(lambda u: float(env(L / u)) ** 2 * L / u**2, 0.0, 1.0, limit=200)
        if tail < tol:
            return L
        L *= 2.0
    return L


#: Time-domain truncation is preferred whenever the stored support tail
#: mass is at most this; the sinc family exceeds it and goes through its
#: band-limited transform instead.
_TIME_ROUTE_TOL = 1e-8


def autocorrelation(h: Kernel, lag: float, lambda_max: float = 200.0) -> float:
    """Self-convolution ``int h(lag - s) h(s) ds``.

    Evaluated in the time domain when the kernel decays fast enough for
    truncation, and through ``(1/2pi) int exp(i lam lag) (h*(lam))**2
    dlam`` when the transform is band-limited. For even kernels this
    coincides with the usual autocorrelation; for odd kernels the two
    differ by sign (the self-convolution is what the variance of the
    limit error process decomposes through).
    """
    lag = float(lag)
    if h.band_limit is None and h.support_tol <= _TIME_ROUTE_TOL:
        # time_eval is exact beyond effective_support too, so a widened
        # window shrinks truncation error to ~support_tol**1.5.
        r = h.effective_support if h.support_tol == 0.0 else 1.5 * h.effective_support
        lo, hi = max(-r, lag - r), min(r, lag + r)
        if lo >= hi:
            return 0.0
        kinks = [p for p in (0.0, lag) if lo < p < hi]
        val, _ = quad(
            lambda s: float(h.time_eval(lag - s)) * float(h.time_eval(s)),
            lo,
            hi,
            points=sorted(kinks) if kinks else None,
            limit=200,
        )
        return val

    L = h.band_limit
    if L is None:
        env = h.ftf_envelope or (lambda lam: np.abs(h.ftf_eval(lam)))
        L = _grow_until_tail_small(env, lambda_max, 1e-12)

    def integrand(lam):
        sq = h.ftf_eval(lam) ** 2
        return math.cos(lam * lag) * sq.real - math.sin(lam * lag) * sq.imag

    val, _ = quad(integrand, 0.0, L, limit=400)
    return val / math.pi
