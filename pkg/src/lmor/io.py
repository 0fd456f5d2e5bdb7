"""JSON model files and CSV response exports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .lti import DelayedDescriptorModel, DescriptorModel, frequency_response, _grid_points

_DELAY_KEYS = ("A1", "A2", "C1", "tau1", "tau2", "tau_m")


def _mat(a):
    a = np.asarray(a)
    if np.iscomplexobj(a):
        if np.any(a.imag != 0):
            raise ValueError("model files hold real matrices only")
        a = a.real
    return [[float(x) for x in row] for row in a]


def model_to_dict(model) -> dict:
    if isinstance(model, DelayedDescriptorModel):
        out = {
            "domain": "continuous",
            "E": _mat(model.E),
            "A": _mat(model.A0),
            "A1": _mat(model.A1),
            "A2": _mat(model.A2),
            "B": _mat(model.B),
            "C": _mat(model.C0),
            "C1": _mat(model.C1),
            "D": _mat(np.zeros((model.n_outputs, model.n_inputs))),
            "tau1": model.tau1,
            "tau2": model.tau2,
            "tau_m": model.tau_m,
        }
        if model.derivative_chain:
            out["derivative_chain"] = list(model.derivative_chain)
            out["chain_input"] = model.chain_input
        return out
    return {
        "domain": "continuous" if model.dt is None else {"discrete": model.dt},
        "E": _mat(model.E),
        "A": _mat(model.A),
        "B": _mat(model.B),
        "C": _mat(model.C),
        "D": _mat(model.D),
    }


def _arr(x, shape=None):
    a = np.array(x, dtype=float)
    if a.size == 0 and shape is not None:
        a = a.reshape(shape)
    return a


def model_from_dict(d: dict):
    dom = d.get("domain", "continuous")
    if dom == "continuous":
        dt = None
    elif isinstance(dom, dict) and "discrete" in dom:
        dt = float(dom["discrete"])
    else:
        raise ValueError(f"unknown domain {dom!r}")
    D = _arr(d["D"])
    if D.ndim != 2:
        raise ValueError("D must be a 2-D array")
    ny, nu = D.shape
    A = _arr(d["A"], (0, 0))
    n = A.shape[0]
    E = _arr(d.get("E", np.eye(n)), (n, n))
    B = _arr(d["B"], (n, nu))
    C = _arr(d["C"], (ny, n))
    if any(k in d for k in _DELAY_KEYS):
        if dt is not None:
            raise ValueError("delayed models are continuous-time")
        return DelayedDescriptorModel(
            E, A, _arr(d.get("A1", np.zeros((n, n))), (n, n)),
            _arr(d.get("A2", np.zeros((n, n))), (n, n)), B, C,
            _arr(d.get("C1", np.zeros_like(C)), C.shape),
            float(d.get("tau1", 0.0)), float(d.get("tau2", 0.0)), float(d.get("tau_m", 0.0)),
            tuple(d.get("derivative_chain", ())), d.get("chain_input"),
        )
    return DescriptorModel(E, A, B, C, D, dt)


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def save_model(path, model) -> None:
    Path(path).write_text(dumps(model_to_dict(model)), encoding="utf-8")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def response_rows(model, grid):
    omega = _grid_points(grid)
    H = frequency_response(model, omega)
    ny, nu = H.shape[1:]
    header = ["omega"]
    for i in range(ny):
        for j in range(nu):
            header += [f"re_H{i + 1}_{j + 1}", f"im_H{i + 1}_{j + 1}"]
    rows = []
    for w, Hk in zip(omega, H):
        row = [repr(float(w))]
        for v in Hk.ravel():
            row += [repr(float(v.real)), repr(float(v.imag))]
        rows.append(row)
    return header, rows


def write_response_csv(path, model, grid) -> None:
    """Frequency response export: omega, then re/im per (output, input) pair."""
    header, rows = response_rows(model, grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_response_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(x) for x in row] for row in r])
    omega = data[:, 0]
    vals = data[:, 1::2] + 1j * data[:, 2::2]
    labels = header[1::2]
    ny = max(int(lbl[4:].split("_")[0]) for lbl in labels) if labels else 0
    return omega, vals.reshape(len(omega), ny, -1)
