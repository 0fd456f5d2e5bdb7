"""Command-line entry point ``lmor``.

Exit codes: 0 ok, 2 configuration/input error, 3 numerical failure,
4 contract violation (e.g. an unstable result where stability is promised).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .errors import (
    ConfigParse,
    ContractViolation,
    DimensionMismatch,
    NonStabilizable,
    StageFailure,
    UnstableModel,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONTRACT = 0, 2, 3, 4


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageFailure):
        return exit_code(exc.cause)
    if isinstance(exc, (ConfigParse, DimensionMismatch, FileNotFoundError, json.JSONDecodeError,
                        KeyError)):
        return EXIT_CONFIG
    if isinstance(exc, (ContractViolation, NonStabilizable, UnstableModel)):
        return EXIT_CONTRACT
    # LinAlgError derives from ValueError, so test it first
    if isinstance(exc, (np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, TypeError, OSError)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def _grid_arg(values, spacing):
    lo, hi, num = values
    return {"spacing": spacing, "lo": float(lo), "hi": float(hi), "num": int(num)}


def _ints(text):
    return [int(x) for x in text.split(",")] if text else None


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="seed of every random choice")


def _interpolate_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="tangential data CSV")
    src.add_argument("--model", help="model JSON to sample")
    p.add_argument("--grid", nargs=3, metavar=("LO", "HI", "NUM"),
                   help="sampling grid in rad/s (with --model)")
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--inputs", type=_ints, help="comma-separated input columns to keep")
    p.add_argument("--outputs", type=_ints, help="comma-separated output rows to keep")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--strict", action="store_true", help="require a clear rank gap")
    p.add_argument("--directions", choices=("cycle", "random"), default="cycle")
    p.add_argument("--data-out", help="write the sampled data CSV here")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_seed(p)


def _cmd_interpolate(a):
    grid = _grid_arg(a.grid, a.spacing) if a.grid else None
    rep = pl.op_interpolate(a.out, a.report, a.model, a.data, grid, a.inputs, a.outputs,
                            a.tol, a.strict, a.directions, a.seed, a.data_out)
    print(f"order {rep['n']} from {rep['m']} points; max residual "
          f"{max(rep['max_left_residual'], rep['max_right_residual']):.3g}")


def _cmd_stabilize(a):
    rep = pl.op_stabilize(a.model, a.out, a.report, a.method)
    print(f"grid Linf gap {rep['linf_gap']:.6g}")


def _cmd_reduce(a):
    rep = pl.op_reduce(a.model, a.order, a.out, a.report, a.band, a.method, a.max_iter)
    tail = (f"band error {rep['band_error']:.3g}" if "band_error" in rep
            else f"worst H2 residual {rep['residuals']['worst']:.3g}")
    print(f"{rep['method']}: order {rep['order']}, converged={rep['converged']}, {tail}")


def _cmd_discretize(a):
    rep = pl.op_discretize(a.controller, a.h, a.out, a.report, a.order, a.m, a.method,
                           a.reducer, a.stabilization, seed=a.seed)
    print(" ".join(f"e_inf[{k}]={v:.4g}" for k, v in rep["e_inf"].items()))


def _cmd_gust_simulate(a):
    rep = pl.op_gust_simulate(a.plant, a.gustset, a.h, a.dt, a.out, a.controller)
    print(f"wrote {rep['n_records']} records to {a.out}")


def _cmd_gust_envelope(a):
    rep = pl.op_gust_envelope(a.open, a.closed, a.out, a.stations)
    print("E = " + ", ".join(f"{e:.4f}" for e in rep["E"]))


def _cmd_gust_plant(a):
    pl.op_synthetic_plant(a.out, seed=a.seed)


def _cmd_gust_gusts(a):
    pl.op_gust_set(a.out, a.V, a.n, (a.L_min, a.L_max))


def _cmd_gust_controller(a):
    pl.op_demo_controller(a.out)


def _cmd_compare(a):
    grid = _grid_arg(a.grid, a.spacing)
    pl.op_compare(a.models, grid, a.out, a.names.split(",") if a.names else None, a.threshold)


def _cmd_pipeline_run(a):
    config = a.config or str(pl.demo_config_path())
    workdir = a.workdir
    if a.config is None and workdir is None:
        raise ConfigParse("the demo config needs --workdir")
    manifest = pl.run_pipeline(config, workdir, seed=a.seed)
    total = sum(s["wall_time"] for s in manifest["stages"])
    print(f"{len(manifest['stages'])} stages ok in {total:.1f} s")


def _cmd_pipeline_demo_config(a):
    Path(a.out).write_text(pl.demo_config_path().read_text(encoding="utf-8"), encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lmor", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interpolate", help="Loewner interpolant from data or model samples")
    _interpolate_args(p)
    p.set_defaults(func=_cmd_interpolate)
    lw = sub.add_parser("loewner", help="alias group for interpolate")
    lws = lw.add_subparsers(dest="loewner_command", required=True)
    p = lws.add_parser("interpolate")
    _interpolate_args(p)
    p.set_defaults(func=_cmd_interpolate)

    p = sub.add_parser("stabilize", help="stable projection of a model")
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("l2", "linf"), default="linf")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=_cmd_stabilize)

    p = sub.add_parser("reduce", help="H2 (irka) or band-limited (fl) reduction")
    p.add_argument("--model", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--band", type=float, help="upper band edge in rad/s (selects fl)")
    p.add_argument("--method", choices=("irka", "fl"))
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=_cmd_reduce)

    p = sub.add_parser("discretize", help="sampled-time controller")
    p.add_argument("--controller", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--order", type=int, default=8)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--method", choices=("loewner", "tustin", "backward"), default="loewner")
    p.add_argument("--reducer", choices=("irka", "fl", "loewner"), default="irka")
    p.add_argument("--stabilization", choices=("linf", "l2"), default="linf")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _add_seed(p)
    p.set_defaults(func=_cmd_discretize)

    g = sub.add_parser("gust", help="gust-load benchmark")
    gs = g.add_subparsers(dest="gust_command", required=True)
    p = gs.add_parser("simulate", help="simulate every gust of a set")
    p.add_argument("--plant", required=True)
    p.add_argument("--controller", help="discrete or continuous controller; omit for open loop")
    p.add_argument("--gustset", required=True)
    p.add_argument("--h", type=float, default=0.04)
    p.add_argument("--dt", type=float, default=0.004)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_gust_simulate)
    p = gs.add_parser("envelope", help="envelope gain per station")
    p.add_argument("--open", required=True)
    p.add_argument("--closed", required=True)
    p.add_argument("--stations")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_gust_envelope)
    p = gs.add_parser("plant", help="write the synthetic aircraft model")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_gust_plant)
    p = gs.add_parser("gusts", help="write the default gust set")
    p.add_argument("--V", type=float, default=200.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--L-min", type=float, default=30.0)
    p.add_argument("--L-max", type=float, default=350.0)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_gust_gusts)
    p = gs.add_parser("controller", help="write the demo controller")
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_gust_controller)

    p = sub.add_parser("compare", help="frequency-response comparison CSV")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--grid", nargs=3, metavar=("LO", "HI", "NUM"), required=True)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--names")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_compare)

    pp = sub.add_parser("pipeline", help="run a staged pipeline")
    pps = pp.add_subparsers(dest="pipeline_command", required=True)
    p = pps.add_parser("run")
    p.add_argument("--config", help="pipeline JSON (default: shipped demo)")
    p.add_argument("--workdir", help="artifact directory (default: next to the config)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_pipeline_run)
    p = pps.add_parser("demo-config", help="copy the shipped demo config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_pipeline_demo_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit status
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
