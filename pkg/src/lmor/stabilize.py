"""Projection of rational models onto the stable subspace.

Two projections are provided.  The L2 projection discards the antistable
additive part.  The L-infinity projection replaces that part by its best
stable approximation in the Hankel-norm sense (zeroth-order Hankel-norm
approximation of the time-flipped part).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import BoundaryPole, IllConditionedHankel
from .lti import (
    DescriptorModel,
    additive_split,
    bilinear_c2d,
    bilinear_d2c,
    eval_transfer,
    frequency_response,
    poles,
    sigma_max,
    to_standard,
)

BOUNDARY_TOL = 1e-8
_INF = 1e-10


@dataclass(frozen=True)
class StableSplit:
    """``H = stable_part + antistable_part + feedthrough``."""

    stable_part: DescriptorModel
    antistable_part: DescriptorModel
    feedthrough: np.ndarray


def _boundary_distance(p, dt):
    return np.abs(p.real) if dt is None else np.abs(np.abs(p) - 1.0)


def _stable_selector(model):
    dt = model.dt
    nA = max(np.linalg.norm(model.A), 1e-300)
    nE = np.linalg.norm(model.E)

    def select(alpha, beta):
        infinite = np.abs(beta) * nA <= _INF * np.abs(alpha) * nE
        lam = alpha / np.where(infinite, 1.0, beta)
        inside = lam.real < 0 if dt is None else np.abs(lam) < 1
        # infinite eigenvalues carry the polynomial part; they stay with the stable part
        return infinite | inside

    return select


def split_stable_antistable(model: DescriptorModel) -> StableSplit:
    """Additive split by ordered generalized Schur form and Sylvester decoupling.

    In discrete time the antistable part is shifted to vanish at ``z = 0``;
    its value there belongs to the causal (stable) side and is added to the
    feedthrough.
    """
    model = model if model.is_real else model.real()
    p = poles(model)
    if p.size and np.any(_boundary_distance(p, model.dt) <= BOUNDARY_TOL):
        raise BoundaryPole(f"pole within {BOUNDARY_TOL:g} of the stability boundary")
    st, anti = additive_split(model, _stable_selector(model))
    D = np.array(model.D, dtype=float)
    if model.dt is not None and anti.order:
        a0 = eval_transfer(anti, 0.0).real
        D = D + a0
        anti = DescriptorModel(anti.E, anti.A, anti.B, anti.C, -a0, anti.dt)
    return StableSplit(st, anti, D)


def _with_feedthrough(m: DescriptorModel, D) -> DescriptorModel:
    return DescriptorModel(m.E, m.A, m.B, m.C, np.asarray(m.D) + D, m.dt)


def project_stable_l2(model: DescriptorModel) -> DescriptorModel:
    """Stable part plus feedthrough; the antistable part is discarded."""
    sp = split_stable_antistable(model)
    return _with_feedthrough(sp.stable_part, sp.feedthrough)


def _balance(A, B, C):
    """Square-root balanced realization of a stable standard model.

    States with Hankel singular values below ``1e-13 * sigma_1`` are
    dropped; they carry no input-output behaviour.
    """
    P = spla.solve_continuous_lyapunov(A, -B @ B.T)
    Q = spla.solve_continuous_lyapunov(A.T, -C.T @ C)

    def factor(X):
        ev, U = np.linalg.eigh(0.5 * (X + X.T))
        return U * np.sqrt(np.clip(ev, 0.0, None))

    Lp, Lq = factor(P), factor(Q)
    U, s, Vh = np.linalg.svd(Lq.T @ Lp)
    if s.size == 0 or s[0] == 0:
        return np.zeros((0, 0)), np.zeros((0, B.shape[1])), np.zeros((C.shape[0], 0)), s
    k = int(np.count_nonzero(s > 1e-13 * s[0]))
    s = s[:k]
    T = Lp @ Vh[:k].T / np.sqrt(s)
    Ti = (U[:, :k] / np.sqrt(s)).T @ Lq.T
    return Ti @ A @ T, Ti @ B, C @ T, s


def _nehari_continuous(anti: DescriptorModel, mult_tol=1e-6):
    """Stable ``Q`` with ``|anti - Q|_inf = sigma_1`` for a continuous antistable part.

    Returns ``(Q, sigma_1, multiplicity, n_minus)``.
    """
    sf = to_standard(anti)
    n_minus = sf.A.shape[0]
    ny, nu = sf.D.shape
    if n_minus == 0:
        return DescriptorModel.static_gain(sf.D), 0.0, 0, 0
    # time flip: F(s) = anti(-s) is stable
    A, B, C = -sf.A, sf.B, -sf.C
    Ab, Bb, Cb, s = _balance(A, B, C)
    if s.size == 0:
        return DescriptorModel.static_gain(sf.D), 0.0, 0, n_minus
    sig = s[0]
    m = int(np.count_nonzero(s >= sig * (1 - mult_tol)))
    k = s.size
    if m == k:
        # all-pass antistable part: the optimum is a constant
        U = -np.linalg.lstsq(Cb.T, Bb, rcond=None)[0]
        Dh = sf.D - sig * U
        return DescriptorModel.static_gain(Dh), float(sig), m, n_minus
    # reorder so the sigma_1 block comes last
    idx = np.r_[m:k, 0:m]
    Ab, Bb, Cb, s = Ab[np.ix_(idx, idx)], Bb[idx], Cb[:, idx], s[idx]
    r = k - m
    S1 = np.diag(s[:r])
    A11 = Ab[:r, :r]
    B1, B2 = Bb[:r], Bb[r:]
    C1, C2 = Cb[:, :r], Cb[:, r:]
    # B2 = -C2^T U
    U = -np.linalg.lstsq(C2.T, B2, rcond=None)[0]
    G = S1 @ S1 - sig ** 2 * np.eye(r)
    if np.linalg.cond(G) > 1e12:
        raise IllConditionedHankel("leading Hankel singular values are nearly repeated")
    Gi = np.linalg.inv(G)
    Ah = Gi @ (sig ** 2 * A11.T + S1 @ A11 @ S1 - sig * C1.T @ U @ B1.T)
    Bh = Gi @ (S1 @ B1 + sig * C1.T @ U)
    Ch = C1 @ S1 + sig * U @ B1.T
    Dh = sf.D - sig * U
    # flip back: X(-s) with X = (Ah, Bh, Ch, Dh) antistable
    Q = DescriptorModel.from_abcd(-Ah, Bh, -Ch, Dh)
    return Q, float(sig), m, n_minus


@dataclass(frozen=True)
class StableProjection:
    """Result of :func:`linf_projection` with order bookkeeping."""

    model: DescriptorModel
    hankel_bound: float
    expected_order: int
    achieved_order: int
    n_stable: int
    n_antistable: int
    multiplicity: int
    fallback: bool = False

    def report(self) -> dict:
        return {
            "hankel_lower_bound": self.hankel_bound,
            "expected_order": self.expected_order,
            "achieved_order": self.achieved_order,
            "n_stable": self.n_stable,
            "n_antistable": self.n_antistable,
            "multiplicity": self.multiplicity,
            "fallback_l2": self.fallback,
        }


def linf_projection(model: DescriptorModel) -> StableProjection:
    """L-infinity stable projection with order bookkeeping.

    The antistable part is replaced by its Nehari approximant; discrete
    models go through the bilinear map to the imaginary axis, which
    preserves the L-infinity norm.  If the Hankel step is ill conditioned
    the L2 projection is returned with ``fallback=True`` and an
    :class:`IllConditionedHankel` warning.
    """
    sp = split_stable_antistable(model)
    n_plus, n_minus = sp.stable_part.order, sp.antistable_part.order
    base = _with_feedthrough(sp.stable_part, sp.feedthrough)
    if n_minus == 0:
        return StableProjection(base, 0.0, n_plus, n_plus, n_plus, 0, 0)
    anti = sp.antistable_part
    try:
        if model.dt is None:
            Q, sig, m, _ = _nehari_continuous(anti)
        else:
            Qc, sig, m, _ = _nehari_continuous(bilinear_d2c(anti, 2.0))
            Q = bilinear_c2d(Qc, 2.0)
            Q = DescriptorModel(Q.E, Q.A, Q.B, Q.C, Q.D, model.dt)
    except (IllConditionedHankel, np.linalg.LinAlgError) as exc:
        warnings.warn(f"Hankel step failed ({exc}); falling back to L2 projection",
                      IllConditionedHankel, stacklevel=2)
        return StableProjection(base, float("nan"), n_plus + n_minus - 1, n_plus,
                                n_plus, n_minus, 0, fallback=True)
    out = base + Q
    return StableProjection(out, sig, n_plus + n_minus - m, out.order, n_plus, n_minus, m)


def project_stable_linf(model: DescriptorModel) -> DescriptorModel:
    """Stable part plus the Hankel-norm (Nehari) replacement of the antistable part."""
    return linf_projection(model).model


def antistable_hankel_norm(model: DescriptorModel) -> float:
    """Largest Hankel singular value of the antistable part: a lower bound on any stable fit."""
    sp = split_stable_antistable(model)
    anti = sp.antistable_part
    if anti.order == 0:
        return 0.0
    if model.dt is not None:
        anti = bilinear_d2c(anti, 2.0)
    sf = to_standard(anti)
    _, _, _, s = _balance(-sf.A, sf.B, -sf.C)
    return float(s[0]) if s.size else 0.0


def linf_gap(model: DescriptorModel, approx: DescriptorModel, num: int = 1000) -> float:
    """Grid L-infinity distance on ``num`` points (log grid, or the Nyquist band in discrete time)."""
    if model.dt is None:
        p = poles(model)
        mags = np.abs(p[np.isfinite(p) & (np.abs(p) > 0)])
        lo = 1e-3 * (mags.min() if mags.size else 1.0)
        hi = 1e3 * (mags.max() if mags.size else 1.0)
        grid = np.concatenate([[0.0], np.logspace(np.log10(lo), np.log10(hi), num - 1)])
    else:
        grid = np.linspace(0.0, np.pi / model.dt, num)
    diff = frequency_response(model, grid) - frequency_response(approx, grid)
    return float(np.max(sigma_max(diff)))


__all__ = [
    "StableSplit", "StableProjection", "split_stable_antistable", "project_stable_l2",
    "project_stable_linf", "linf_projection", "antistable_hankel_norm", "linf_gap",
]
