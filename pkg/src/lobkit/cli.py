"""Command-line entry point for reproducible simulation, calibration and
validation runs.

Every run writes a manifest (config hash, seed, package versions) next to
its outputs, including on failure paths that reach the run stage.  Exit
codes: 0 success, 2 configuration error, 3 data error, 4 numerical
blowup or runaway rates.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .accel import NUMBA_ENABLED
from .calibration import CalibrationScaling, run_calibration
from .config import load_model_config
from .errors import (
    ConfigurationError, DataFormatError, NumericalBlowupError,
    RunawayRateError,
)
from .macro import MacroField, simulate_macro
from .meso import MesoState, simulate_meso_dynamic
from .micro import simulate_micro
from .model import DiscreteBook
from .validation import meso_macro_ladder, micro_meso_ladder, trivial_ladder

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _file_sha256(path):
    if path is None or not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _versions():
    out = {"lobkit": __version__, "numpy": np.__version__,
           "numba_enabled": NUMBA_ENABLED}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:
        pass
    import pandas
    import scipy
    out["scipy"] = scipy.__version__
    out["pandas"] = pandas.__version__
    return out


def _write_manifest(out_dir, args, status, error=None, extra=None):
    manifest = {
        "command": args.command,
        "config": getattr(args, "config", None),
        "config_sha256": _file_sha256(getattr(args, "config", None)),
        "seed": getattr(args, "seed", None),
        "versions": _versions(),
        "status": status,
    }
    if error is not None:
        manifest["error"] = error
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_csv(path, array, header, fmt="%.12g"):
    np.savetxt(path, np.asarray(array), delimiter=",", fmt=fmt,
               header=header)


def _cmd_simulate_macro(args, out_dir):
    cfg = load_model_config(args.config)
    L = cfg.scheme.num_space - 1
    init = MacroField(bid=_fit_profile(cfg.init_bid, L),
                      ask=_fit_profile(cfg.init_ask, L),
                      price=cfg.init_price)
    runs = max(args.ensemble, 1)
    seeds = np.random.SeedSequence(args.seed).generate_state(runs)
    qvs = np.empty(runs)
    for r in range(runs):
        res = simulate_macro(init, cfg.coeffs, cfg.price_spec, cfg.scheme,
                             seed=int(seeds[r]), grid=None, rule=cfg.rule)
        qvs[r] = res.quadratic_variation
        if r == 0:
            times, prices = res.price_series()
            _save_csv(os.path.join(out_dir, "price.csv"),
                      np.column_stack((times, prices)),
                      "time [min], price [currency]")
            snaps = np.hstack((res.snapshot_times[:, None],
                               res.snapshot_bid, res.snapshot_ask))
            _save_csv(os.path.join(out_dir, "snapshots.csv"), snaps,
                      "time [min], bid levels 1..N-1, ask levels 1..N-1 "
                      "[model volume units]")
            _save_csv(os.path.join(out_dir, "avg_profile.csv"),
                      np.column_stack((np.arange(1, L + 1) / cfg.scheme.num_space,
                                       res.avg_bid, res.avg_ask)),
                      "position, avg bid, avg ask [model volume units]")
    _save_csv(os.path.join(out_dir, "qv.csv"),
              np.column_stack((seeds.astype(np.float64), qvs)),
              "seed, price quadratic variation [currency^2]")
    return {"quadratic_variation_mean": float(qvs.mean()),
            "quadratic_variation_runs": runs}


def _fit_profile(profile, L):
    profile = np.asarray(profile, dtype=np.float64)
    if profile.shape[0] == L:
        return profile
    if profile.shape[0] == 1:
        return np.full(L, profile[0])
    raise ConfigurationError(
        f"initial profile has {profile.shape[0]} levels, expected {L}")


def _cmd_simulate_meso(args, out_dir):
    cfg = load_model_config(args.config)
    L = cfg.grid.num_levels
    horizon = cfg.meso.horizon
    snap_times = np.linspace(horizon / 5, horizon, 5)
    state = MesoState.initial(_fit_profile(cfg.init_bid, L),
                              _fit_profile(cfg.init_ask, L),
                              mid=cfg.init_price)
    rng = np.random.default_rng(args.seed)
    path = simulate_meso_dynamic(state, cfg.coeffs, cfg.price_spec, cfg.rule,
                                 horizon=horizon, dt=cfg.meso.step_size(),
                                 rng=rng, grid=cfg.grid,
                                 snapshot_times=snap_times)
    snaps = np.hstack((path.snapshot_times[:, None], path.snapshot_bid,
                       path.snapshot_ask, path.snapshot_mid[:, None]))
    _save_csv(os.path.join(out_dir, "snapshots.csv"), snaps,
              "time, bid levels, ask levels, mid")
    _save_csv(os.path.join(out_dir, "reflection_ledger.csv"),
              np.column_stack((path.terminal.ledger_bid,
                               path.terminal.ledger_ask)),
              "accumulated bid reflection, ask reflection per level")
    if path.price_events:
        _save_csv(os.path.join(out_dir, "price_events.csv"),
                  np.asarray([[pe.time, 1.0 if pe.direction == "u" else -1.0,
                               pe.new_mid] for pe in path.price_events]),
                  "time, direction (+1 up / -1 down), new mid")
    return {"price_events": len(path.price_events)}


def _cmd_simulate_micro(args, out_dir):
    cfg = load_model_config(args.config)
    L = cfg.grid.num_levels
    n = cfg.micro.scale_n
    root = np.sqrt(n)
    bid = np.rint(root * _fit_profile(cfg.init_bid, L)).astype(np.int64)
    ask = np.rint(root * _fit_profile(cfg.init_ask, L)).astype(np.int64)
    book = DiscreteBook(bid=bid, ask=ask, mid=cfg.init_price,
                        scale="micro", n=n)
    horizon = n * cfg.micro.horizon
    snap_times = np.linspace(horizon / 5, horizon, 5)
    path = simulate_micro(book, cfg.coeffs, cfg.price_spec, horizon=horizon,
                          n=n, seed=args.seed, rule=cfg.rule, grid=cfg.grid,
                          snapshot_times=snap_times,
                          event_cap=cfg.micro.event_cap)
    _save_csv(os.path.join(out_dir, "events.csv"),
              np.column_stack((path.event_times, path.event_side,
                               path.event_level, path.event_kind)),
              "time, side (0 bid / 1 ask), level, kind "
              "(0 add / 1 remove / 2 left / 3 right)")
    _save_csv(os.path.join(out_dir, "snapshots.csv"),
              np.hstack((path.snapshot_times[:, None],
                         path.snapshot_bid, path.snapshot_ask)),
              "micro time, bid levels, ask levels [orders]", fmt="%.12g")
    if path.price_events:
        _save_csv(os.path.join(out_dir, "price_events.csv"),
                  np.asarray([[pe.time, 1.0 if pe.direction == "u" else -1.0,
                               pe.new_mid] for pe in path.price_events]),
                  "micro time, direction, new mid")
    return {"events": int(path.num_events), "frozen": bool(path.frozen)}


def _cmd_calibrate(args, out_dir):
    scaling = CalibrationScaling(levels=args.levels,
                                 grid_size=args.levels + 1)
    est = run_calibration(args.messages, args.orderbook, alpha=args.alpha,
                          scaling=scaling)
    est.per_level_frame().to_csv(os.path.join(out_dir, "estimates.csv"),
                                 index=False, float_format="%.12g")
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(est.report_text())
    p = est.price
    return {"gamma_hat": p.gamma_hat, "delta_hat": p.delta_hat,
            "events": est.n_events}


def _cmd_validate(args, out_dir):
    from .model import CoefficientSet
    if args.ladder == "trivial":
        report = trivial_ladder(paths=500, seed=args.seed)
    elif args.ladder == "micro-meso":
        coeffs = CoefficientSet.constant(3, sigma=0.6, limit=0.4, cancel=0.2,
                                         cancel_slope=0.3, smoothing=0.5)
        report = micro_meso_ladder(np.full(3, 0.5), np.full(3, 0.5), coeffs,
                                   t=1.0, n_ladder=(100, 1000, 10_000),
                                   paths=args.ensemble or 2000,
                                   seed=args.seed)
    elif args.ladder == "meso-macro":
        report = meso_macro_ladder(
            base_sigma=lambda x: 0.6,
            base_drift=lambda x: 0.5 * np.sin(np.pi * x),
            init_profile=lambda x: 0.5 * x * (1.0 - x) * 4.0,
            alpha=1.0, paths=args.ensemble or 2000, seed=args.seed)
    else:
        raise ConfigurationError(f"unknown ladder {args.ladder!r}")
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write(report.to_text())
    report.to_frame().to_csv(os.path.join(out_dir, "cells.csv"), index=False,
                             float_format="%.12g")
    return {"ladder": args.ladder, "passed": bool(report.passed())}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobkit",
        description="Multi-scale limit order book simulation and calibration")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="model configuration file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--ensemble", type=int, default=1,
                       help="number of independent runs")

    common(sub.add_parser("simulate-micro", help="event-driven micro model"))
    common(sub.add_parser("simulate-meso", help="reflected-SDE meso model"))
    common(sub.add_parser("simulate-macro", help="forward scheme for the "
                          "continuum model"))

    cal = sub.add_parser("calibrate", help="estimate parameters from "
                         "LOBSTER files")
    cal.add_argument("--messages", required=True)
    cal.add_argument("--orderbook", required=True)
    cal.add_argument("--levels", type=int, default=50)
    cal.add_argument("--alpha", type=float, default=0.01,
                     help="smoothing rate used in the drift estimator")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", default=".")

    val = sub.add_parser("validate", help="cross-scale statistical checks")
    val.add_argument("--ladder", required=True,
                     choices=("trivial", "micro-meso", "meso-macro"))
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--out", default=".")
    val.add_argument("--ensemble", type=int, default=0,
                     help="paths per cell (0 = default budget)")
    return parser


_COMMANDS = {
    "simulate-macro": _cmd_simulate_macro,
    "simulate-meso": _cmd_simulate_meso,
    "simulate-micro": _cmd_simulate_micro,
    "calibrate": _cmd_calibrate,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    threads = os.environ.get("LOBKIT_THREADS")
    if threads:
        os.environ.setdefault("NUMBA_NUM_THREADS", threads)
    args = build_parser().parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}",
              file=sys.stderr)
        return EXIT_CONFIG

    try:
        extra = _COMMANDS[args.command](args, args.out)
    except ConfigurationError as exc:
        _write_manifest(args.out, args, "error", error=str(exc))
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        _write_manifest(args.out, args, "error", error=str(exc))
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalBlowupError, RunawayRateError) as exc:
        _write_manifest(args.out, args, "error", error=str(exc))
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_manifest(args.out, args, "ok", extra=extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
