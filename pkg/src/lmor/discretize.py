"""Controller discretisation through Loewner interpolation of holder-corrected samples.

The sampled-data error of a discrete controller ``Kd`` against a continuous
``K`` is measured on the Nyquist band as
``max_w sigma_max(K(iw) - R(iw) Kd(e^{iwh}))`` with the zero-order-hold
weight ``R(s) = (1 - e^{-sh}) / (sh)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HolderZero,
    InvalidOrderBound,
    NonConvergenceWarning,
    NonStabilizable,
    PoleAtMapSingularity,
)
from .lti import (
    DescriptorModel,
    bilinear_c2d,
    bilinear_d2c,
    eval_transfer,
    frequency_response,
    is_stable,
    sigma_max,
)
from .loewner import build_pencil, compress, data_from_samples, minimal_order
from .reduction import InterpolationConfig, fl_reduce, irka
from .stabilize import linf_projection, project_stable_l2


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling period ``h``, ``m`` positive grid frequencies and the order budget ``n_bar``.

    ``m`` must be even so that the conjugate pairs split evenly between the
    left and right interpolation sets.
    """

    h: float
    m: int = 200
    n_bar: int = 8

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("sampling period h must be positive")
        if self.n_bar < 1:
            raise InvalidOrderBound(f"order bound n_bar must be >= 1, got {self.n_bar}")
        if self.m < self.n_bar:
            raise InvalidOrderBound(f"m = {self.m} frequencies cannot support order {self.n_bar}")
        if self.m % 2:
            raise ValueError("m must be even (conjugate pairs alternate between sides)")

    @property
    def omega_s(self) -> float:
        return 2 * math.pi / self.h

    @property
    def omega_N(self) -> float:
        return math.pi / self.h

    def grid(self) -> np.ndarray:
        """``w_k = (k - 1/2) w_N / m``, strictly inside ``(0, w_N)``."""
        return (np.arange(1, self.m + 1) - 0.5) * self.omega_N / self.m


def holder_response(omega, h: float):
    """Zero-order-hold weight ``R(iw) = (1 - e^{-iwh}) / (iwh)``; equals 1 at ``w = 0``."""
    omega = np.asarray(omega, dtype=float)
    x = 1j * omega * h
    small = np.abs(omega * h) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1 - x / 2 + x ** 2 / 6 - x ** 3 / 24, -np.expm1(-safe) / safe)
    return out if out.ndim else complex(out)


def sampler_alias_sum(u_hat, omega: float, h: float, q_max: int):
    """Truncated aliasing sum ``(1/h) sum_{|q|<=q_max} u_hat(i(w + q w_s))``.

    Returns ``(value, tail)`` where ``tail`` is the magnitude of the two
    outermost retained terms, an estimate of the truncation error.
    """
    if q_max < 0:
        raise ValueError("q_max must be nonnegative")
    ws = 2 * math.pi / h
    terms = {q: complex(u_hat(1j * (omega + q * ws))) / h for q in range(-q_max, q_max + 1)}
    value = sum(terms.values())
    tail = abs(terms[q_max]) + (abs(terms[-q_max]) if q_max else 0.0)
    return value, tail


def _evaluate(K, s):
    if isinstance(K, DescriptorModel) or hasattr(K, "E"):
        return np.atleast_2d(eval_transfer(K, s))
    return np.atleast_2d(np.asarray(K(s), dtype=complex))


def build_discretization_dataset(K, cfg: SamplingConfig, directions="cycle", seed=None):
    """Tangential data ``R(iw_k)^{-1} K(iw_k)`` at ``z_k = e^{+-iw_k h}``."""
    if getattr(K, "dt", None) is not None:
        raise ValueError("K must be a continuous-time model or a frequency oracle")
    omega = cfg.grid()
    R = holder_response(omega, cfg.h)
    if np.any(np.abs(R) < 1e-12):
        raise HolderZero("holder response vanishes on the grid")
    vals = np.array([_evaluate(K, 1j * w) / r for w, r in zip(omega, R)])
    z = np.exp(1j * omega * cfg.h)
    points = np.concatenate([z, z.conj()])
    values = np.concatenate([vals, vals.conj()])
    return data_from_samples(points, values, directions, seed, cfg.h)


def tustin(K: DescriptorModel, h: float) -> DescriptorModel:
    """Bilinear substitution ``s = (2/h)(z - 1)/(z + 1)``."""
    return bilinear_c2d(K, h)


def backward(K: DescriptorModel, h: float) -> DescriptorModel:
    """Backward-difference substitution ``s = (z - 1)/(z h)``."""
    if K.dt is not None:
        raise ValueError("backward expects a continuous model")
    if not h > 0:
        raise ValueError("sampling period must be positive")
    E, A, B, C = (np.asarray(x) for x in (K.E, K.A, K.B, K.C))
    Eb = E - h * A
    if Eb.size and np.linalg.cond(Eb) > 1e13:
        raise PoleAtMapSingularity(f"pole at s = 1/h = {1 / h:g}")
    X = np.linalg.solve(Eb, B) if Eb.size else B
    return DescriptorModel(Eb, E, h * E @ X, C, K.D + h * C @ X, h)


def _error_grid(h, grid_size):
    wN = math.pi / h
    return wN * np.arange(1, grid_size + 1) / (grid_size + 1)


def disc_error_einf(K, Kd: DescriptorModel, h: float, grid_size: int = 1000) -> float:
    """``max_w sigma_max(K(iw) - R(iw) Kd(e^{iwh}))`` over ``grid_size`` points inside ``(0, w_N)``."""
    return _einf_metric(K, h, grid_size)(Kd)


def _einf_metric(K, h, grid_size):
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    omega = _error_grid(h, grid_size)
    Hk = np.array([_evaluate(K, 1j * w) for w in omega])
    R = holder_response(omega, h)[:, None, None]

    def metric(Kd):
        return float(np.max(sigma_max(Hk - R * frequency_response(Kd, omega))))

    return metric


@dataclass
class DiscretizationReport:
    """Diagnostics of :func:`loewner_discretize`."""

    n: int
    r: int
    n_c: int
    e_inf: float
    stabilization_gap: float
    reducer: str
    inflated: bool = False
    order_deficit: bool = False
    candidates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "r": self.r, "n_c": self.n_c, "e_inf": self.e_inf,
            "stabilization_gap": self.stabilization_gap, "reducer": self.reducer,
            "inflated": self.inflated, "order_deficit": self.order_deficit,
            "candidates": self.candidates,
        }


def _reduce(Kn, Ks, pencil, r, reducer, cfg):
    """Order-``r`` approximations of ``Kn``.

    Interpolatory reducers need a stable model, so they act on ``Ks``, the
    stable projection of ``Kn`` (``Kn`` itself when it is stable).  SVD
    truncation of the pencil is always offered as well.
    """
    out = []
    if r >= Kn.order:
        out.append((Kn, "none"))
        return out
    if reducer in ("irka", "fl") and Ks.order > r:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NonConvergenceWarning)
                if reducer == "irka":
                    out.append((irka(Ks, InterpolationConfig(r)).model, "irka"))
                else:
                    Kc = bilinear_d2c(Ks)
                    band = (2 / cfg.h) * math.tan(0.45 * math.pi)
                    red = fl_reduce(Kc, InterpolationConfig(r, omega_band=band)).model
                    out.append((bilinear_c2d(red, cfg.h), "fl"))
        except Exception:  # noqa: BLE001 - a failed reducer leaves the truncation candidate
            pass
    elif reducer in ("irka", "fl"):
        out.append((Ks, "stable-projection"))
    out.append((compress(pencil, r), "loewner"))
    return out


def _stabilize(Kr, stabilization):
    if is_stable(Kr):
        return Kr
    if stabilization == "l2":
        return project_stable_l2(Kr)
    return linf_projection(Kr).model


def _grid_gap(A, B, h, num=400):
    omega = _error_grid(h, num)
    return float(np.max(sigma_max(frequency_response(A, omega) - frequency_response(B, omega))))


def loewner_discretize(K, cfg: SamplingConfig, *, tol: float = 1e-10, reducer: str = "irka",
                       stabilization: str = "linf", grid_size: int = 1000, scan: bool = True,
                       require_order: bool = False, directions="cycle", seed=None):
    """Discretise ``K`` by interpolating holder-corrected frequency samples.

    Steps: sample ``R^{-1} K`` on the grid, build the Loewner pencil, take
    its numerical rank ``n`` (non-strict: the samples are irrational in
    ``z``), compress, reduce to ``r = min(n, n_bar)``, project onto the
    stable subspace.  If stabilization loses states, ``r`` is inflated up to
    ``2 n_bar`` while the stabilized order stays within ``n_bar``.  With
    ``scan`` the candidates for every smaller budget are also formed and the
    one with least sampled-data error wins, so a larger ``n_bar`` never
    does worse.  Returns ``(Kd, report)``.
    """
    if reducer not in ("irka", "fl", "loewner"):
        raise ValueError(f"unknown reducer {reducer!r}")
    if stabilization not in ("linf", "l2"):
        raise ValueError(f"unknown stabilization {stabilization!r}")
    data = build_discretization_dataset(K, cfg, directions, seed)
    pencil = build_pencil(data)
    n = minimal_order(pencil, data, tol, strict=False)
    if n == 0:
        Kd = DescriptorModel.static_gain(_evaluate(K, 0.0).real, cfg.h)
        e = disc_error_einf(K, Kd, cfg.h, grid_size)
        return Kd, DiscretizationReport(0, 0, 0, e, 0.0, "none")
    Kn = compress(pencil, n)
    Ks = _stabilize(Kn, stabilization)
    einf = _einf_metric(K, cfg.h, grid_size)
    target = min(n, cfg.n_bar)
    budgets = range(1, target + 1) if scan else [target]
    best = None
    cands = []
    for rb in budgets:
        top = min(n, 2 * cfg.n_bar) if rb == target else rb
        for r in range(rb, top + 1):
            reached = False
            for Kr, used in _reduce(Kn, Ks, pencil, r, reducer, cfg):
                Kd = _stabilize(Kr, stabilization)
                if Kd.order > cfg.n_bar or not is_stable(Kd):
                    continue
                reached = reached or Kd.order >= rb
                e = einf(Kd)
                cands.append({"budget": rb, "r": r, "n_c": Kd.order, "e_inf": e, "reducer": used})
                if best is None or e < best[0]:
                    best = (e, Kd, Kr, r, used, rb)
            if reached:
                break
    if best is None:
        raise NonStabilizable("no stable candidate within the order budget")
    e, Kd, Kr, r, used, rb = best
    deficit = not any(c["n_c"] >= target for c in cands)
    if require_order and deficit:
        raise NonStabilizable(f"no stable candidate of order {target} within r <= {2 * cfg.n_bar}")
    gap = _grid_gap(Kr, Kd, cfg.h) if Kr is not Kd else 0.0
    report = DiscretizationReport(n, r, Kd.order, e, gap, used, inflated=r > rb,
                                  order_deficit=deficit, candidates=cands)
    return Kd, report


__all__ = [
    "SamplingConfig", "DiscretizationReport", "holder_response", "sampler_alias_sum",
    "build_discretization_dataset", "loewner_discretize", "tustin", "backward",
    "disc_error_einf",
]
