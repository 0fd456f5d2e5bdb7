"""Stage operations shared by the command line and the pipeline runner.

Every stage reads and writes plain files (model JSON, data/record CSV,
report JSON) so that a run is a sequence of file transformations.  The
runner validates the stage graph before computing anything, routes all
randomness through one seeded generator and records input/output hashes
in a manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigParse, ContractViolation, DimensionMismatch, StageFailure
from .lti import eval_transfer, frequency_response, is_stable, sigma_max


def threads() -> int:
    """Parallelism cap from ``LMOR_THREADS`` (default 1)."""
    raw = os.environ.get("LMOR_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigParse(f"LMOR_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


def parse_grid(spec) -> np.ndarray:
    """``{"spacing": "log"|"linear", "lo", "hi", "num"}`` or an explicit list (rad/s)."""
    if isinstance(spec, dict):
        try:
            lo, hi, num = float(spec["lo"]), float(spec["hi"]), int(spec["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigParse(f"bad grid spec {spec!r}: {exc}") from None
        spacing = spec.get("spacing", "log")
        if spacing == "log":
            if lo <= 0:
                raise ConfigParse("log grid needs lo > 0")
            return np.logspace(math.log10(lo), math.log10(hi), num)
        if spacing == "linear":
            return np.linspace(lo, hi, num)
        raise ConfigParse(f"unknown grid spacing {spacing!r}")
    try:
        return np.asarray(spec, dtype=float).ravel()
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"bad grid {spec!r}: {exc}") from None


def _sub(H, outputs, inputs):
    if outputs is not None:
        H = H[..., list(outputs), :]
    if inputs is not None:
        H = H[..., list(inputs)]
    return H


def _require_stable(model, what):
    if not is_stable(model):
        raise ContractViolation(f"{what} is not stable")


# ---------------------------------------------------------------------------
# stage operations

def op_synthetic_plant(out, seed=0, **params):
    from .gustcase import SyntheticAircraftConfig, make_synthetic_aircraft

    for key in ("damping", "freq_range", "stations"):
        if key in params:
            params[key] = tuple(params[key])
    plant = make_synthetic_aircraft(SyntheticAircraftConfig(seed=seed, **params))
    io.save_model(out, plant)
    return {}


def op_demo_controller(out, **params):
    from .gustcase import demo_controller

    io.save_model(out, demo_controller(**params))
    return {}


def op_gust_set(out, V=200.0, n=10, L_range=(30.0, 350.0)):
    from .gustcase import default_gust_set

    io.save_json(out, default_gust_set(V, n, tuple(L_range)).to_dict())
    return {}


def op_interpolate(out, report=None, model=None, data=None, grid=None, inputs=None,
                   outputs=None, tol=1e-9, strict=False, directions="cycle", seed=0,
                   data_out=None):
    """Loewner interpolant from a data CSV or from samples of a model on ``grid``."""
    from .loewner import (build_pencil, compress, data_from_samples, interpolation_residuals,
                          minimal_order, read_data_csv, singular_values, write_data_csv)

    if (model is None) == (data is None):
        raise ConfigParse("interpolate needs exactly one of 'model' or 'data'")
    if data is not None:
        ds = read_data_csv(data)
    else:
        if grid is None:
            raise ConfigParse("sampling a model needs a grid")
        src = io.load_model(model)
        w = parse_grid(grid)
        if src.dt is None:
            pts = 1j * w
        else:
            pts = np.exp(1j * w * src.dt)
        H = np.array([_sub(eval_transfer(src, p), outputs, inputs) for p in pts])
        ds = data_from_samples(np.concatenate([pts, pts.conj()]),
                               np.concatenate([H, H.conj()]), directions, seed, src.dt)
        if data_out is not None:
            write_data_csv(data_out, ds)
    pencil = build_pencil(ds)
    n = minimal_order(pencil, ds, tol, strict=strict)
    rom = compress(pencil, n, real=ds.is_conjugate_closed())
    io.save_model(out, rom)
    lres, rres = interpolation_residuals(rom, ds)
    s1, _ = singular_values(pencil)
    rep = {
        "m": int(pencil.m),
        "n": int(n),
        "tol": float(tol),
        "strict": bool(strict),
        "singular_values": [float(x) for x in (s1[:min(s1.size, 3 * n + 10)] / s1[0])],
        "max_left_residual": float(lres.max()),
        "max_right_residual": float(rres.max()),
        "stable": bool(is_stable(rom)),
    }
    if report:
        io.save_json(report, rep)
    return rep


def op_stabilize(model, out, report=None, method="linf"):
    from .stabilize import antistable_hankel_norm, linf_gap, linf_projection, project_stable_l2

    src = io.load_model(model)
    if method == "linf":
        proj = linf_projection(src)
        res, rep = proj.model, proj.report()
    elif method == "l2":
        res = project_stable_l2(src)
        rep = {"hankel_lower_bound": antistable_hankel_norm(src), "achieved_order": res.order}
    else:
        raise ConfigParse(f"unknown stabilization method {method!r}")
    _require_stable(res, "stabilized model")
    rep = {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in rep.items()}
    rep["method"] = method
    rep["linf_gap"] = linf_gap(src, res)
    io.save_model(out, res)
    if report:
        io.save_json(report, rep)
    return rep


def op_reduce(model, order, out, report=None, band=None, method=None, max_iter=100,
              conv_tol=1e-6):
    from .reduction import InterpolationConfig, band_error, check_h2_optimality, fl_reduce, irka

    src = io.load_model(model)
    if getattr(src, "A0", None) is not None:
        raise DimensionMismatch("reduce expects a rational model; interpolate the delayed plant first")
    method = method or ("fl" if band else "irka")
    cfg = InterpolationConfig(int(order), max_iter, conv_tol, band if method == "fl" else None)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = fl_reduce(src, cfg) if method == "fl" else irka(src, cfg)
    red = res.model
    _require_stable(red, "reduced model")
    io.save_model(out, red)
    opt = check_h2_optimality(src, red)
    rep = {
        "method": method,
        "order": int(red.order),
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "residuals": opt.to_dict(),
        "shift_history": [[[float(z.real), float(z.imag)] for z in np.atleast_1d(s)]
                          for s in res.history],
        "movement": [float(x) for x in res.movement],
        "warnings": sorted({str(w.message) for w in caught}),
    }
    if band:
        rep["band"] = float(band)
        rep["band_error"] = band_error(src, red, float(band))
    if report:
        io.save_json(report, rep)
    return rep


def op_discretize(controller, h, out, report=None, order=8, m=200, method="loewner",
                  reducer="irka", stabilization="linf", tol=1e-10, seed=0, grid_size=1000):
    from .discretize import (SamplingConfig, backward, disc_error_einf, loewner_discretize,
                             tustin)

    K = io.load_model(controller)
    if K.dt is not None:
        raise ConfigParse("controller must be continuous-time")
    h = float(h)
    cfg = SamplingConfig(h, int(m), int(order))
    kd = {"tustin": tustin(K, h), "backward": backward(K, h)}
    Kl, lrep = loewner_discretize(K, cfg, tol=tol, reducer=reducer, stabilization=stabilization,
                                  grid_size=grid_size, seed=seed)
    kd["loewner"] = Kl
    if method not in kd:
        raise ConfigParse(f"unknown discretisation method {method!r}")
    chosen = kd[method]
    _require_stable(chosen, f"{method} controller")
    io.save_model(out, chosen)
    rep = {
        "method": method,
        "h": h,
        "grid": {"size": int(grid_size), "omega_N": math.pi / h},
        "e_inf": {k: disc_error_einf(K, v, h, grid_size) for k, v in sorted(kd.items())},
        "n": int(lrep.n),
        "n_c": int(chosen.order),
        "stabilization_gap": float(lrep.stabilization_gap),
        "loewner": {k: v for k, v in lrep.to_dict().items() if k != "candidates"},
    }
    if report:
        io.save_json(report, rep)
    return rep


def _record_files(directory):
    files = sorted(Path(directory).glob("gust_*.csv"))
    if not files:
        raise ConfigParse(f"no gust_*.csv records in {directory}")
    return files


def op_gust_simulate(plant, gustset, h, dt, out, controller=None, settle=3.0):
    from .gustcase import GustSet, simulate_gust_set

    P = io.load_model(plant)
    K = io.load_model(controller) if controller else None
    gusts = GustSet.from_dict(json.loads(Path(gustset).read_text(encoding="utf-8")))
    recs = simulate_gust_set(P, K, gusts, float(h), float(dt), settle=settle,
                             max_workers=threads())
    Path(out).mkdir(parents=True, exist_ok=True)
    for k, rec in enumerate(recs):
        rec.to_csv(Path(out) / f"gust_{k:02d}.csv")
    return {"n_records": len(recs)}


def op_gust_envelope(open, closed, out, stations=None):  # noqa: A002 - CLI flag name
    from .gustcase import EnvelopeConfig, SimulationRecords, envelope_stats, write_envelope_csv

    if stations:
        d = json.loads(Path(stations).read_text(encoding="utf-8"))
        env = EnvelopeConfig(tuple(d["stations"]), d.get("load_output_indices"))
    else:
        env = EnvelopeConfig()
    fo, fc = _record_files(open), _record_files(closed)
    if [f.name for f in fo] != [f.name for f in fc]:
        raise DimensionMismatch("open and closed record sets differ")
    stats = envelope_stats([SimulationRecords.from_csv(f) for f in fo],
                           [SimulationRecords.from_csv(f) for f in fc], env)
    write_envelope_csv(out, stats)
    return {"E": [g.gain for g in stats]}


# ---------------------------------------------------------------------------
# response comparison

def compare_responses(models, grid, names=None, threshold=None):
    """Gains, phases and singular values of ``models`` on ``grid`` plus errors to the first.

    Discrete models compared with a continuous reference are weighted by
    the zero-order-hold response.  Returns ``(header, rows, meta)``.
    """
    from .discretize import holder_response

    w = parse_grid(grid)
    if not models:
        raise ConfigParse("compare needs at least one model")
    names = names or [f"m{k}" for k in range(len(models))]
    shape = (models[0].n_outputs, models[0].n_inputs)
    for mdl in models[1:]:
        if (mdl.n_outputs, mdl.n_inputs) != shape:
            raise DimensionMismatch("models have different input/output dimensions")
    ref_dt = models[0].dt
    resp = []
    for mdl in models:
        H = frequency_response(mdl, w)
        if mdl.dt is not None and ref_dt is None:
            H = holder_response(w, mdl.dt)[:, None, None] * H
        resp.append(H)
    ny, nu = shape
    header = ["omega"]
    cols = []
    for k, (nm, H) in enumerate(zip(names, resp)):
        header.append(f"sigma_{nm}")
        cols.append(sigma_max(H))
        for i in range(ny):
            for j in range(nu):
                header += [f"gain_{nm}_{i + 1}_{j + 1}", f"phase_{nm}_{i + 1}_{j + 1}"]
                cols += [np.abs(H[:, i, j]), np.degrees(np.angle(H[:, i, j]))]
    for nm, H in zip(names[1:], resp[1:]):
        header.append(f"err_{nm}")
        cols.append(sigma_max(H - resp[0]))
        for i in range(ny):
            for j in range(nu):
                header.append(f"phase_err_{nm}_{i + 1}_{j + 1}")
                d = np.angle(H[:, i, j] * np.conj(resp[0][:, i, j]))
                cols.append(np.degrees(d))
    rows = np.column_stack([w] + cols)
    meta = {"reference": names[0]}
    if threshold is not None:
        meta["threshold"] = float(threshold)
    return header, rows, meta


def write_compare_csv(path, header, rows, meta):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"# {k}={v}" for k, v in sorted(meta.items())])
        wr.writerow(header)
        wr.writerows([[repr(float(v)) for v in row] for row in rows])


def read_compare_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        meta = dict(c[2:].split("=", 1) for c in next(rd))
        header = next(rd)
        rows = np.array([[float(v) for v in row] for row in rd])
    return header, rows, meta


def op_compare(models, grid, out, names=None, threshold=None):
    loaded = [io.load_model(p) for p in models]
    if not names:
        stems = [Path(p).stem for p in models]
        names = [f"{st}{k}" if stems.count(st) > 1 else st for k, st in enumerate(stems)]
    header, rows, meta = compare_responses(loaded, grid, names, threshold)
    write_compare_csv(out, header, rows, meta)
    return {}


# ---------------------------------------------------------------------------
# pipeline runner

# per op: (input keys, output keys, seeded)
STAGE_OPS = {
    "synthetic_plant": (op_synthetic_plant, (), ("out",), True),
    "demo_controller": (op_demo_controller, (), ("out",), False),
    "gust_set": (op_gust_set, (), ("out",), False),
    "interpolate": (op_interpolate, ("model", "data"), ("out", "report", "data_out"), True),
    "stabilize": (op_stabilize, ("model",), ("out", "report"), False),
    "reduce": (op_reduce, ("model",), ("out", "report"), False),
    "discretize": (op_discretize, ("controller",), ("out", "report"), True),
    "gust_simulate": (op_gust_simulate, ("plant", "controller", "gustset"), ("out",), False),
    "gust_envelope": (op_gust_envelope, ("open", "closed", "stations"), ("out",), False),
    "compare": (op_compare, ("models",), ("out",), False),
}


@dataclass
class PipelineConfig:
    """Ordered stages; paths are relative to ``workdir``."""

    stages: list
    seed: int = 0
    workdir: Path = Path(".")
    source: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path, workdir=None) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigParse(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict) or not isinstance(d.get("stages"), list):
            raise ConfigParse("config must be an object with a 'stages' list")
        wd = Path(workdir) if workdir is not None else path.parent / d.get("workdir", ".")
        try:
            seed = int(d.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigParse("seed must be an integer") from None
        cfg = cls(d["stages"], seed, wd, d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Check op names, unique stage names and that every input exists or is produced earlier."""
        produced = set()
        names = set()
        for st in self.stages:
            if not isinstance(st, dict) or "op" not in st or "name" not in st:
                raise ConfigParse("every stage needs 'name' and 'op'")
            if st["name"] in names:
                raise ConfigParse(f"duplicate stage name {st['name']!r}")
            names.add(st["name"])
            if st["op"] not in STAGE_OPS:
                raise ConfigParse(f"unknown op {st['op']!r} in stage {st['name']!r}")
            _, ins, outs, _ = STAGE_OPS[st["op"]]
            for key in ins:
                for p in _as_list(st.get(key)):
                    if p not in produced and not (self.workdir / p).exists():
                        raise StageFailure(st["name"], FileNotFoundError(f"input {p!r} not found"))
            for key in outs:
                produced.update(_as_list(st.get(key)))


def _as_list(v):
    if v is None:
        return []
    return list(v) if isinstance(v, (list, tuple)) else [v]


def file_hash(path: Path) -> str:
    """sha256 of a file, or of the sorted (name, hash) list of a directory."""
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(f.relative_to(path)).encode())
            h.update(file_hash(f).encode())
    else:
        h.update(path.read_bytes())
    return h.hexdigest()


def _resolve(stage, keys, wd):
    args = {}
    for k, v in stage.items():
        if k in ("name", "op", "params"):
            continue
        if k in keys:
            args[k] = [str(wd / p) for p in v] if isinstance(v, list) else (
                str(wd / v) if v is not None else None)
        else:
            args[k] = v
    args.update(stage.get("params", {}))
    return args


def run_pipeline(config_path, workdir=None, manifest_name="manifest.json", seed=None):
    """Run every stage in order and write the manifest.  Returns the manifest dict.

    A failing stage stops the run; the manifest written so far records it
    and :class:`StageFailure` is raised.
    """
    cfg = PipelineConfig.load(config_path, workdir)
    if seed is not None:
        cfg.seed = int(seed)
    wd = cfg.workdir
    wd.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    manifest = {"seed": cfg.seed, "config_sha256": file_hash(Path(config_path)), "stages": []}
    mpath = wd / manifest_name

    def flush():
        mpath.write_text(io.dumps(manifest), encoding="utf-8")

    for st in cfg.stages:
        fn, ins, outs, seeded = STAGE_OPS[st["op"]]
        stage_seed = int(rng.integers(2 ** 31))
        args = _resolve(st, set(ins) | set(outs) | {"data_out"}, wd)
        if seeded:
            args.setdefault("seed", stage_seed)
        for k in outs:
            for p in _as_list(args.get(k)):
                Path(p).parent.mkdir(parents=True, exist_ok=True)
        entry = {
            "stage": st["name"],
            "op": st["op"],
            "seed": args.get("seed") if seeded else None,
            "inputs": {p: file_hash(wd / p) for k in ins for p in _as_list(st.get(k))},
        }
        t0 = time.perf_counter()
        try:
            fn(**args)
        except Exception as exc:
            entry.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                         wall_time=time.perf_counter() - t0)
            manifest["stages"].append(entry)
            flush()
            raise StageFailure(st["name"], exc) from exc
        entry["outputs"] = {p: file_hash(wd / p) for k in outs for p in _as_list(st.get(k))}
        entry["status"] = "ok"
        entry["wall_time"] = time.perf_counter() - t0
        manifest["stages"].append(entry)
        flush()
    return manifest


def manifest_hashes(manifest: dict) -> list:
    """The reproducible part of a manifest: stage, seed and all hashes."""
    return [(s["stage"], s["seed"], sorted(s["inputs"].items()), sorted(s.get("outputs", {}).items()))
            for s in manifest["stages"]]


def demo_config_path() -> Path:
    return Path(__file__).with_name("data") / "demo_pipeline.json"


__all__ = [
    "PipelineConfig", "run_pipeline", "compare_responses", "write_compare_csv",
    "read_compare_csv", "parse_grid", "file_hash", "manifest_hashes", "demo_config_path",
    "STAGE_OPS", "threads",
]
