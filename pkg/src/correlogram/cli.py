"""Command-line front end.

Five subcommands wire the library to files: ``check-kernel`` verifies
window-family conditions, ``simulate`` writes output paths over a delta
ladder, ``estimate`` runs one simulate-estimate cycle, ``bounds`` emits
tail-bound reports, and ``montecarlo`` runs the replication harness.

Exit codes: 0 on success, 1 for a domain-level failure (a condition
check fails, an estimator lacks coverage, a bound degenerates), 2 for
usage or configuration errors. All randomness flows from the config's
base_seed; nothing is seeded from the clock.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .bounds import (
    TailBoundReport,
    corollary1_report,
    corollary2_report,
    theorem3_report,
    theorem4_detail,
)
from .config import (
    COMMANDS,
    ConfigError,
    RunManifest,
    command_view,
    load_config,
    resolve_out_dir,
)
from .errors import (
    BoundUnavailable,
    ConsistencyError,
    CoverageError,
    InfiniteMassiveness,
    PadError,
)
from .estimator import estimate_correlogram, write_estimate_csv
from .kernels import (
    check_family_conditions,
    check_weighted_spectral,
    family_from_name,
    kernel_from_spec,
)
from .montecarlo import (
    ExperimentConfig,
    empirical_sup_tail,
    run_replications,
    sample_stationary_Y,
    write_result_csv,
    write_result_json,
    write_trajectories_csv,
)
from .simulate import (
    NoiseSeed,
    TimeGrid,
    required_pad,
    simulate_output,
    simulate_pair,
    wiener_increments,
    write_path_binary,
    write_path_csv,
)
from .spectral import CovarianceModel

__all__ = ["main", "build_parser"]

# Stream offset reserved for auxiliary draws (sup-of-Y calibration), far
# above any plausible replication count so streams never collide.
_AUX_STREAM_OFFSET = 1_000_000


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="correlogram",
        description="Cross-correlogram estimation experiments for Wiener-driven LTI systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check-kernel": "verify window-family conditions and the weighted spectral integral",
        "simulate": "simulate and write output paths over a delta ladder",
        "estimate": "run one simulate-estimate cycle and write the estimate",
        "bounds": "compute tail-bound reports over a threshold grid",
        "montecarlo": "run the replication harness and write aggregate results",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--out", default=None, help="output directory (overrides env and config)")
        if name == "montecarlo":
            p.add_argument("--workers", type=int, default=1,
                           help="replication worker processes (outputs invariant to N)")
            p.add_argument("--emit-paths", action="store_true",
                           help="also write Z trajectories and the first replication's paths")
    return parser


def _cfg_float(view: dict, key: str, positive: bool = True) -> float:
    try:
        value = float(view[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config key {key!r} must be a number") from exc
    if positive and not value > 0:
        raise ConfigError(f"config key {key!r} must be positive, got {value}")
    return value


def _cfg_seed(view: dict) -> NoiseSeed:
    raw = view.get("base_seed")
    if not isinstance(raw, dict) or "seed" not in raw:
        raise ConfigError('base_seed must be an object like {"seed": 0, "stream_id": 0}')
    try:
        return NoiseSeed(int(raw["seed"]), int(raw.get("stream_id", 0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid base_seed: {exc}") from exc


def _cfg_kernel(view: dict):
    spec = view.get("h")
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError('h must be an object like {"name": "sinc"}')
    try:
        return kernel_from_spec(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid kernel h: {exc}") from exc


def _cfg_family(view: dict):
    spec = view.get("g_family")
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError('g_family must be an object like {"name": "triangular"}')
    try:
        return family_from_name(spec["name"], _cfg_float(view, "c"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid g_family: {exc}") from exc


def _cfg_taus(view: dict, key: str = "tau_grid") -> tuple:
    raw = view.get(key)
    try:
        taus = tuple(float(t) for t in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a list of numbers") from exc
    if not taus or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigError(f"{key} must be non-empty and strictly ascending")
    return taus


def _cfg_interval(view: dict) -> tuple:
    raw = view.get("interval")
    try:
        a, b = (float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError("interval must be a two-number list [a, b]") from exc
    if not b > a:
        raise ConfigError(f"interval must satisfy a < b, got [{a}, {b}]")
    return a, b


def _estimation_grid(T: float, dt: float, taus: tuple) -> TimeGrid:
    t_start = min(0.0, taus[0])
    t_end = T + max(0.0, taus[-1])
    n = int(round((t_end - t_start) / dt)) + 1
    if n < 2:
        raise ConfigError("grid needs at least two samples; check T and dt")
    return TimeGrid(t_start=t_start, dt=dt, n=n)


def cmd_check_kernel(cfg: dict, out_dir: Path, args) -> int:
    view = command_view(cfg, "check-kernel")
    family = _cfg_family(view)
    h = _cfg_kernel(view)
    deltas = view.get("deltas", [10.0, 100.0, 1000.0, 10000.0, 100000.0])
    lambda_window = float(view.get("lambda_window", 1.0))
    tol = float(view.get("tol", 1e-9))
    exponent = float(view.get("hunt_exponent", 2.0))
    lambda_max = float(view.get("lambda_max", 200.0))

    manifest = RunManifest.start("check-kernel", cfg)
    try:
        report = check_family_conditions(family, deltas, lambda_window, tol=tol)
        hunt = check_weighted_spectral(h, exponent, lambda_max)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    passed = report.passed and hunt.converged
    payload = {
        "family": report.as_dict(),
        "hunt": {
            "kernel": view["h"],
            "exponent": exponent,
            "lambda_max": lambda_max,
            "value": hunt.value,
            "relative_change": hunt.relative_change,
            "converged": hunt.converged,
        },
        "passed": passed,
    }
    target = out_dir / "conditions.json"
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    manifest.add_output(target)
    manifest.finish(out_dir)

    for name, ok in (
        ("square-integrable", report.l2_ok),
        ("even", report.even_ok),
        ("transform sup bounded", report.sup_bounded),
        ("compact limit -> c", report.limit_ok),
        ("weighted spectral integral finite", hunt.converged),
    ):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"wrote {target}")
    return 0 if passed else 1


def cmd_simulate(cfg: dict, out_dir: Path, args) -> int:
    view = command_view(cfg, "simulate")
    family = _cfg_family(view)
    h = _cfg_kernel(view)
    seed = _cfg_seed(view)
    dt = _cfg_float(view, "dt")
    T = _cfg_float(view, "T")
    t_start = float(view.get("t_start", 0.0))
    raw_deltas = view.get("deltas", [1.0, 10.0, 100.0, 1000.0])
    try:
        deltas = [float(d) for d in raw_deltas]
    except (TypeError, ValueError) as exc:
        raise ConfigError("deltas must be a list of numbers") from exc
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigError("deltas must be a non-empty list of positive numbers")

    n = int(round(T / dt)) + 1
    if n < 2:
        raise ConfigError("grid needs at least two samples; check T and dt")
    grid = TimeGrid(t_start=t_start, dt=dt, n=n)

    windows = [family(d) for d in deltas]
    # One increment array padded for every kernel at once, so the same
    # Wiener path drives Y and each X_delta.
    pad = max(required_pad(k, dt) for k in [h, *windows])
    increments = wiener_increments(grid, pad, seed)

    manifest = RunManifest.start("simulate", cfg)
    written = []
    y_path = simulate_output(h, increments, grid, pad)
    for suffix, writer in ((".csv", write_path_csv), (".bin", write_path_binary)):
        target = out_dir / f"path_Y{suffix}"
        writer(y_path, target)
        manifest.add_output(target)
        written.append(target)
    for d, g in zip(deltas, windows):
        x_path = simulate_output(g, increments, grid, pad)
        for suffix, writer in ((".csv", write_path_csv), (".bin", write_path_binary)):
            target = out_dir / f"path_X_delta{d:g}{suffix}"
            writer(x_path, target)
            manifest.add_output(target)
            written.append(target)
    manifest.finish(out_dir)
    for target in written:
        print(f"wrote {target}")
    return 0


def cmd_estimate(cfg: dict, out_dir: Path, args) -> int:
    view = command_view(cfg, "estimate")
    family = _cfg_family(view)
    h = _cfg_kernel(view)
    seed = _cfg_seed(view)
    c = _cfg_float(view, "c")
    delta = _cfg_float(view, "delta")
    dt = _cfg_float(view, "dt")
    T = _cfg_float(view, "T")
    taus = _cfg_taus(view)
    g = family(delta)
    grid = _estimation_grid(T, dt, taus)

    manifest = RunManifest.start("estimate", cfg)
    y_path, x_path = simulate_pair(h, g, grid, seed)
    est = estimate_correlogram(
        h, g, c, y_path, x_path, T, taus,
        seed_info={"seed": seed.seed, "stream_id": seed.stream_id},
    )
    target = out_dir / "estimate.csv"
    write_estimate_csv(est, target)
    manifest.add_output(target)
    manifest.add_output(target.with_suffix(".json"))
    manifest.finish(out_dir)
    print(f"wrote {target}")
    print(f"wrote {target.with_suffix('.json')}")
    return 0


_DEFAULT_METHODS = ("theorem3_pointwise", "theorem4_sup", "corollary1", "corollary2")


def cmd_bounds(cfg: dict, out_dir: Path, args) -> int:
    view = command_view(cfg, "bounds")
    family = _cfg_family(view)
    h = _cfg_kernel(view)
    seed = _cfg_seed(view)
    c = _cfg_float(view, "c")
    delta = _cfg_float(view, "delta")
    T = _cfg_float(view, "T")
    a, b = _cfg_interval(view)
    methods = view.get("methods", list(_DEFAULT_METHODS))
    unknown = set(methods) - set(_DEFAULT_METHODS)
    if unknown:
        raise ConfigError(f"unknown bound methods: {sorted(unknown)}")
    xs = sorted({float(x) for x in view.get("x_grid", [1.0, 2.0, 3.0, 4.0, 6.0, 8.0])})
    multipliers = sorted({float(m) for m in view.get("theorem4_x_multipliers", [1.5, 2.0, 3.0])})
    r = float(view.get("r", 0.5))
    gamma = float(view.get("gamma", 0.5))
    y_tail_M = int(view.get("y_tail_M", 2000))
    y_tail_points = int(view.get("y_tail_points", 101))
    if not xs or not multipliers:
        raise ConfigError("x_grid and theorem4_x_multipliers must be non-empty")

    model = CovarianceModel(h=h, g=family(delta), c=c)
    shared = {"T": T, "interval": [a, b], "r": r, "delta": delta, "c": c}

    manifest = RunManifest.start("bounds", cfg)
    signals: dict = {}
    written = []

    y_tail = None
    if "corollary1" in methods or "corollary2" in methods:
        draws = sample_stationary_Y(
            h, np.linspace(a, b, y_tail_points), y_tail_M, seed.spawn(_AUX_STREAM_OFFSET)
        )
        y_tail = empirical_sup_tail(draws)

    for method in methods:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                if method == "theorem3_pointwise":
                    report = theorem3_report(xs, settings=shared)
                elif method == "theorem4_sup":
                    # Thresholds are multiples of the constant A, so the
                    # expensive entropy optimization runs exactly once.
                    detail = theorem4_detail(model, T, a, b, r)
                    A = detail["A_TD"]
                    xs4 = [m * A for m in multipliers]
                    raw = [2.0 * math.exp(-x / A) for x in xs4]
                    constants = dict(detail, raw_bounds=[float(v) for v in raw])
                    report = TailBoundReport(
                        method="theorem4_sup",
                        x_values=np.asarray(xs4, dtype=float),
                        bound_values=np.clip(np.asarray(raw, dtype=float), 0.0, 1.0),
                        constants=constants,
                        settings=dict(shared, x_multipliers=multipliers),
                    )
                elif method == "corollary1":
                    report = corollary1_report(
                        h, a, b, xs, gamma, y_tail,
                        settings=dict(shared, gamma=gamma, y_tail_M=y_tail_M),
                    )
                else:
                    report = corollary2_report(
                        h, a, b, xs, y_tail,
                        settings=dict(shared, y_tail_M=y_tail_M),
                    )
            except (BoundUnavailable, InfiniteMassiveness) as exc:
                signals.setdefault(method, []).append(str(exc))
                continue
        degenerate = [str(w.message) for w in caught if issubclass(w.category, RuntimeWarning)]
        if degenerate:
            signals.setdefault(method, []).extend(degenerate)
        target = out_dir / f"bound_{method}.json"
        report.to_json(target)
        manifest.add_output(target)
        written.append(target)

    if signals:
        target = out_dir / "bounds_signals.json"
        with open(target, "w", encoding="utf-8") as fh:
            json.dump({"signals": signals}, fh, indent=2)
            fh.write("\n")
        manifest.add_output(target)
        written.append(target)
    manifest.finish(out_dir)
    for target in written:
        print(f"wrote {target}")
    if signals:
        for method, msgs in signals.items():
            for msg in msgs:
                print(f"degenerate [{method}]: {msg}", file=sys.stderr)
        return 1
    return 0


def cmd_montecarlo(cfg: dict, out_dir: Path, args) -> int:
    view = command_view(cfg, "montecarlo")
    _cfg_family(view)  # fail fast on an unknown window name
    _cfg_kernel(view)
    seed = _cfg_seed(view)
    try:
        experiment = ExperimentConfig(
            h_spec=view["h"],
            g_family_spec=view["g_family"],
            T=_cfg_float(view, "T"),
            delta=_cfg_float(view, "delta"),
            c=_cfg_float(view, "c"),
            dt=_cfg_float(view, "dt"),
            tau_grid=_cfg_taus(view),
            replications=int(view.get("replications", 200)),
            base_seed=seed,
            interval=_cfg_interval(view),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    workers = max(1, int(getattr(args, "workers", 1) or 1))
    manifest = RunManifest.start("montecarlo", cfg)
    result = run_replications(experiment, workers=workers)

    written = []
    target = out_dir / "result.csv"
    write_result_csv(result, target)
    manifest.add_output(target)
    written.append(target)
    target = out_dir / "result.json"
    write_result_json(result, target)
    manifest.add_output(target)
    written.append(target)

    if getattr(args, "emit_paths", False):
        max_reps = view.get("emit_max_reps")
        target = out_dir / "trajectories.csv"
        write_trajectories_csv(result, target, max_reps=None if max_reps is None else int(max_reps))
        manifest.add_output(target)
        written.append(target)
        # First replication's paths, re-simulated from its own stream.
        from .montecarlo import _lattice, _sim_grid

        h, g = experiment.kernels()
        lattice = _lattice(experiment)
        grid = _sim_grid(experiment, lattice)
        y_path, x_path = simulate_pair(h, g, grid, experiment.base_seed.spawn(0))
        for label, path in (("Y", y_path), ("X", x_path)):
            target = out_dir / f"path_rep0_{label}.csv"
            write_path_csv(path, target)
            manifest.add_output(target)
            written.append(target)

    manifest.finish(out_dir)
    for target in written:
        print(f"wrote {target}")
    return 0


_HANDLERS = {
    "check-kernel": cmd_check_kernel,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "bounds": cmd_bounds,
    "montecarlo": cmd_montecarlo,
}

_DOMAIN_ERRORS = (
    PadError,
    CoverageError,
    ConsistencyError,
    InfiniteMassiveness,
    BoundUnavailable,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        out_dir = resolve_out_dir(args.out, cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot prepare output directory: {exc}", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.command](cfg, out_dir, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_ERRORS as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        # Replication failures arrive here tagged with their index.
        if "replication" in str(exc):
            print(f"domain failure: {exc}", file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
