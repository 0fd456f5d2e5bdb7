"""Projection-based reduction: IRKA and a frequency-limited variant."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.optimize import linear_sum_assignment

from .errors import (
    DefectivePoles,
    NonConvergenceWarning,
    SingularProjectedE,
    UnstableModel,
)
from .lti import (
    DescriptorModel,
    additive_split,
    eval_derivative,
    eval_transfer,
    fl_gramians,
    frequency_response,
    is_stable,
    poles,
    sigma_max,
    to_standard,
)

_COINCIDE = 1e-8


@dataclass(frozen=True)
class InterpolationConfig:
    """Settings shared by :func:`irka` and :func:`fl_reduce`."""

    r: int
    max_iter: int = 100
    conv_tol: float = 1e-6
    omega_band: float | None = None
    initial_shifts: tuple | None = None

    def __post_init__(self):
        if int(self.r) < 1:
            raise ValueError("reduced order r must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.omega_band is not None and not self.omega_band > 0:
            raise ValueError("omega_band must be positive")
        if self.initial_shifts is not None:
            s = np.asarray(self.initial_shifts, complex)
            if s.size != self.r:
                raise ValueError(f"{s.size} initial shifts given for order {self.r}")
            if not _conjugate_closed(s):
                raise ValueError("initial shifts must be closed under conjugation")
            if self.omega_band is not None and np.any(np.abs(s.imag) > self.omega_band * (1 + 1e-12)):
                raise ValueError("initial shifts must lie inside the band")
            object.__setattr__(self, "initial_shifts", tuple(complex(x) for x in s))


def _conjugate_closed(s, tol=1e-9):
    s = np.asarray(s, complex)
    if s.size == 0:
        return True
    d = np.abs(s[:, None] - np.conj(s)[None, :])
    rows, cols = linear_sum_assignment(d)
    return bool(np.all(d[rows, cols] <= tol * np.maximum(1.0, np.abs(s[rows]))))


def _clean_conjugates(s, tol=1e-6):
    """Snap near-real values to the real axis and pair the rest exactly."""
    s = np.asarray(s, complex).copy()
    scale = np.maximum(np.abs(s), 1e-300)
    s[np.abs(s.imag) <= tol * scale] = s[np.abs(s.imag) <= tol * scale].real
    upper = s[s.imag > 0]
    real = s[s.imag == 0].real
    lower = s[s.imag < 0]
    if upper.size != lower.size:
        # unmatched complex value: keep its real part
        keep = min(upper.size, lower.size)
        upper = upper[np.argsort(-np.abs(upper.imag))][:keep]
        real = np.concatenate([real, s[s.imag != 0].real[: s.size - 2 * keep - real.size]])
    upper = np.sort_complex(upper)
    return np.concatenate([np.sort(real).astype(complex), upper, upper.conj()])


def project_petrov_galerkin(model: DescriptorModel, V, W) -> DescriptorModel:
    """Reduced realization ``(W^H E V, W^H A V, W^H B, C V)``."""
    V = np.asarray(V)
    W = np.asarray(W)
    if V.shape != W.shape or V.shape[0] != model.order:
        raise ValueError("V and W must both be n x r")
    WH = W.conj().T
    Er = WH @ model.E @ V
    if Er.size:
        sv = np.linalg.svd(Er, compute_uv=False)
        scale = np.linalg.norm(W, 2) * np.linalg.norm(model.E, 2) * np.linalg.norm(V, 2)
        if sv[-1] <= 1e-14 * max(scale, sv[0]):
            raise SingularProjectedE("projected E = W^H E V is singular")
    return DescriptorModel(Er, WH @ model.A @ V, WH @ model.B, model.C @ V, model.D, model.dt)


def _orth(X):
    if X.shape[1] == 0:
        return X
    Q, _ = np.linalg.qr(X)
    return Q


def _realify_columns(cols, shifts):
    """Real basis spanning conjugate-closed complex columns."""
    out = []
    for k, s in enumerate(shifts):
        if s.imag > 0:
            out.extend([cols[:, k].real, cols[:, k].imag])
        elif s.imag == 0:
            out.append(cols[:, k].real)
    return np.column_stack(out) if out else np.zeros((cols.shape[0], 0))


def tangential_bases(model: DescriptorModel, shifts, b, c):
    """Real rational Krylov bases for right directions ``b`` and left directions ``c``.

    Column ``k`` of ``V`` is ``(s_k E - A)^{-1} B b_k``, of ``W`` it is
    ``(s_k E - A)^{-T} C^T c_k``; conjugate shifts carry conjugate directions.
    """
    shifts = np.asarray(shifts, complex)
    n = model.order
    Vc = np.empty((n, shifts.size), complex)
    Wc = np.empty((n, shifts.size), complex)
    for k, s in enumerate(shifts):
        M = s * model.E - model.A
        lu = spla.lu_factor(M)
        Vc[:, k] = spla.lu_solve(lu, model.B @ b[k])
        Wc[:, k] = spla.lu_solve(lu, model.C.T @ c[k], trans=1)
    return _orth(_realify_columns(Vc, shifts)), _orth(_realify_columns(Wc, shifts))


def _pole_residues(red: DescriptorModel, check_defective=False):
    lam, X = spla.eig(red.A, red.E)
    cond = np.linalg.cond(X)
    if check_defective and cond > 1e12:
        raise DefectivePoles(f"reduced eigenvector matrix condition {cond:.3g} exceeds 1e12")
    EX = red.E @ X
    bt = np.linalg.solve(EX, red.B)
    ct = red.C @ X
    return lam, bt, ct.T


def _mirror(lam, dt):
    """Interpolation points from reduced poles; unstable poles are reflected first."""
    lam = np.asarray(lam, complex)
    if dt is None:
        lam = -np.abs(lam.real) + 1j * lam.imag
        return -lam
    lam = np.where(np.abs(lam) >= 1, 1 / np.conj(lam), lam)
    lam = np.where(lam == 0, 1e-12, lam)
    return 1 / lam


def _separate(shifts):
    """Perturb coincident shifts so the reduced poles stay semi-simple."""
    s = np.asarray(shifts, complex).copy()
    for i in range(s.size):
        for j in range(i):
            if abs(s[i] - s[j]) <= _COINCIDE * max(1.0, abs(s[i])):
                bump = _COINCIDE * max(1.0, abs(s[i]))
                s[i] = s[i] + (bump if s[i].imag == 0 else bump * (1 + 1j) if s[i].imag > 0
                               else bump * (1 - 1j))
    return s


def shift_movement(new, old) -> float:
    """Largest relative change between two shift sets under optimal pairing."""
    new = np.asarray(new, complex)
    old = np.asarray(old, complex)
    if new.size != old.size:
        return math.inf
    d = np.abs(new[:, None] - old[None, :]) / np.maximum(np.abs(old)[None, :], 1e-300)
    rows, cols = linear_sum_assignment(d)
    return float(d[rows, cols].max()) if d.size else 0.0


def default_shifts(model: DescriptorModel, r: int) -> np.ndarray:
    """Log-spaced conjugate pairs across the pole-magnitude range of ``model``."""
    p = poles(model)
    if model.dt is None:
        mags = np.abs(p[np.abs(p) > 0]) if p.size else np.array([1.0])
        lo, hi = (mags.min(), mags.max()) if mags.size else (1.0, 1.0)
        npair, odd = divmod(r, 2)
        m = np.logspace(np.log10(lo), np.log10(hi), max(npair, 1))[:npair]
        pairs = m * np.exp(1j * np.pi / 4)
        real = [math.sqrt(lo * hi)] if odd else []
    else:
        ang = np.abs(np.angle(p))
        ang = ang[ang > 0]
        lo, hi = (ang.min(), ang.max()) if ang.size else (0.1, 1.0)
        rad = 1.0 / min(0.99, float(np.median(np.abs(p)))) if p.size else 2.0
        npair, odd = divmod(r, 2)
        th = np.logspace(np.log10(lo), np.log10(hi), max(npair, 1))[:npair]
        pairs = rad * np.exp(1j * th)
        real = [rad] if odd else []
    return _clean_conjugates(np.concatenate([np.asarray(real, complex), pairs, pairs.conj()]))


def _relaxed(old, target, alpha):
    """Move each old shift a fraction ``alpha`` towards its matched target."""
    d = np.abs(target[:, None] - old[None, :])
    rows, cols = linear_sum_assignment(d)
    out = old[cols] + alpha * (target[rows] - old[cols])
    return _clean_conjugates(out)


@dataclass
class IrkaResult:
    """Reduced model plus iteration record.  Unpacks as ``(model, history)``."""

    model: DescriptorModel
    history: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    movement: list = field(default_factory=list)

    def __iter__(self):
        yield self.model
        yield self.history


def irka(model: DescriptorModel, cfg: InterpolationConfig) -> IrkaResult:
    """H2-optimal tangential interpolation by the IRKA fixed point.

    Shifts are mirrored reduced poles (``-lambda`` in continuous time,
    ``1/lambda`` in discrete time); iteration stops when the relative shift
    movement falls below ``cfg.conv_tol``.  On non-convergence the iterate
    with the smallest movement is returned with ``converged=False``.
    """
    if not model.is_real:
        raise TypeError("irka needs a real realization")
    if not is_stable(model):
        raise UnstableModel("irka requires a stable model")
    r = int(cfg.r)
    if r > model.order:
        raise ValueError(f"reduced order {r} exceeds model order {model.order}")
    shifts = (np.asarray(cfg.initial_shifts, complex) if cfg.initial_shifts is not None
              else default_shifts(model, r))
    shifts = _separate(_clean_conjugates(shifts))
    b = np.ones((r, model.n_inputs), complex)
    c = np.ones((r, model.n_outputs), complex)
    history = [shifts.copy()]
    movement = []
    best = ((True, math.inf), None)
    red = None
    converged = False
    relax, stall, stall_mark = 1.0, 10, 0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        try:
            V, W = tangential_bases(model, shifts, b, c)
            red = project_petrov_galerkin(model, V, W)
            lam, bt, ct = _pole_residues(red)
        except (np.linalg.LinAlgError, SingularProjectedE, ValueError):
            if best[1] is None:
                raise
            break
        target = _clean_conjugates(_mirror(lam, model.dt))
        move = shift_movement(target, shifts)
        movement.append(move)
        stable = bool(np.all(np.abs(lam) < 1) if model.dt is not None else np.all(lam.real < 0))
        # stable iterates rank ahead of unstable ones
        score = (not stable, move)
        if score < best[0]:
            best = (score, red)
        if move < cfg.conv_tol:
            history.append(target.copy())
            converged = stable
            break
        # damp the update when the plain fixed point stalls; fixed points are unchanged
        if (len(movement) - stall_mark > stall
                and min(movement[-stall:]) >= min(movement[:-stall])):
            relax = max(0.5 * relax, 0.05)
            stall_mark = len(movement)
        elif (relax < 1.0 and len(movement) - stall_mark > 5
              and np.all(np.diff(movement[-6:]) < 0)):
            relax = min(1.0, 1.25 * relax)
            stall_mark = len(movement)
        if relax < 1.0:
            target = _relaxed(shifts, target, relax)
        new = _separate(target)
        history.append(new.copy())
        mirrored = _mirror(lam, model.dt)
        d = np.abs(new[:, None] - mirrored[None, :])
        rows, cols = linear_sum_assignment(d)
        perm = np.empty(new.size, int)
        perm[rows] = cols
        b, c = bt[perm], ct[perm]
        shifts = new
    out = red if converged else best[1]
    if not converged:
        warnings.warn(f"irka stopped after {it} iterations (shift movement {best[0][1]:.3g}, "
                      f"stable={not best[0][0]})",
                      NonConvergenceWarning, stacklevel=2)
    return IrkaResult(out.real() if out.is_real is False and _is_numerically_real(out) else out,
                      history, converged, it, movement)


def _is_numerically_real(m: DescriptorModel, tol=1e-10) -> bool:
    mats = [m.E, m.A, m.B, m.C, m.D]
    return all(np.abs(np.imag(x)).max(initial=0) <= tol * max(1.0, np.abs(x).max(initial=0))
               for x in mats)


@dataclass
class OptimalityReport:
    """Per-pole relative mismatch of the three H2 interpolation conditions."""

    poles: np.ndarray
    shifts: np.ndarray
    right: np.ndarray
    left: np.ndarray
    derivative: np.ndarray

    @property
    def worst(self) -> float:
        vals = np.concatenate([self.right, self.left, self.derivative])
        return float(vals.max()) if vals.size else 0.0

    def to_dict(self) -> dict:
        return {
            "poles": [[float(p.real), float(p.imag)] for p in self.poles],
            "shifts": [[float(p.real), float(p.imag)] for p in self.shifts],
            "right": [float(x) for x in self.right],
            "left": [float(x) for x in self.left],
            "derivative": [float(x) for x in self.derivative],
            "worst": self.worst,
        }


def check_h2_optimality(full: DescriptorModel, reduced: DescriptorModel) -> OptimalityReport:
    """Residuals of the right, left and bitangential-derivative conditions.

    Each residual is scaled by the size of the full-model quantity at the
    mirrored pole, e.g. ``|c^T (H - Hr)(k) b| / (|c| |H(k)| |b|)``.
    """
    lam, bt, ct = _pole_residues(reduced, check_defective=True)
    kap = _mirror(lam, reduced.dt)
    R, L, Dv = [], [], []
    for k, b, c in zip(kap, bt, ct):
        H = eval_transfer(full, k)
        Hr = eval_transfer(reduced, k)
        dH = eval_derivative(full, k)
        dHr = eval_derivative(reduced, k)
        nb, nc = np.linalg.norm(b), np.linalg.norm(c)
        nH = max(np.linalg.norm(H, 2), 1e-300)
        ndH = max(np.linalg.norm(dH, 2), 1e-300)
        R.append(np.linalg.norm((H - Hr) @ b) / (nH * nb))
        L.append(np.linalg.norm(c @ (H - Hr)) / (nH * nc))
        Dv.append(abs(c @ (dH - dHr) @ b) / (ndH * nb * nc))
    return OptimalityReport(lam, kap, np.array(R), np.array(L), np.array(Dv))


# ---------------------------------------------------------------------------
# frequency-limited reduction

def band_initial_shifts(r: int, omega: float) -> np.ndarray:
    """Initial points ``{i w_k, -i w_k}`` with ``0 < w_k < omega``, plus a real ``w_0`` for odd ``r``."""
    npair, odd = divmod(int(r), 2)
    wk = omega * np.arange(1, npair + 1) / (npair + 1)
    real = [omega / (2 * (npair + 1))] if odd else []
    return np.concatenate([np.asarray(real, complex), 1j * wk, -1j * wk])


def band_error(full, reduced, omega: float, num: int = 400) -> float:
    """Peak error over ``[0, omega]`` relative to the peak in-band gain of ``full``."""
    return _band_metric(full, omega, num)(reduced)


def _band_metric(full, omega, num=400):
    grid = np.linspace(0.0, omega, num)
    Hf = frequency_response(full, grid)
    ref = max(float(np.max(sigma_max(Hf))), 1e-300)

    def metric(reduced):
        Hr = frequency_response(reduced, grid)
        return float(np.max(sigma_max(Hf - Hr))) / ref

    return metric


def fl_h2_error(full: DescriptorModel, reduced: DescriptorModel, omega: float) -> float:
    """Band-limited H2 norm of ``full - reduced`` over ``[-omega, omega]``, relative to ``full``."""
    err = full - reduced
    if not np.allclose(err.D, 0):
        err = DescriptorModel(err.E, err.A, err.B, err.C, None, err.dt)
    num = _fl_h2(err, omega)
    den = _fl_h2(DescriptorModel(full.E, full.A, full.B, full.C, None, full.dt), omega)
    return num / max(den, 1e-300)


def _fl_h2(model, omega):
    sf = to_standard(model)
    Pw, _ = fl_gramians(DescriptorModel.from_abcd(sf.A, sf.B, sf.C), omega)
    return math.sqrt(max(float(np.trace(sf.C @ Pw @ sf.C.T).real), 0.0))


def _stable_part(red: DescriptorModel) -> DescriptorModel:
    if is_stable(red):
        return red
    dt = red.dt

    def select(alpha, beta):
        lam = alpha / np.where(beta == 0, 1e-300, beta)
        return np.abs(lam) < 1 if dt is not None else lam.real < 0

    st, _ = additive_split(red, select)
    return DescriptorModel(st.E, st.A, st.B, st.C, red.D, dt)


def _fl_balanced(base: DescriptorModel, Pw, Qw, r: int) -> DescriptorModel:
    """Square-root projection onto the dominant band-limited Hankel directions."""

    def factor(X):
        ev, U = np.linalg.eigh(X)
        return U * np.sqrt(np.clip(ev, 0.0, None))

    Lp, Lq = factor(Pw), factor(Qw)
    U, S, Vh = np.linalg.svd(Lq.T @ Lp)
    if S[r - 1] <= 1e-14 * S[0]:
        raise SingularProjectedE("band-limited gramians have fewer than r dominant directions")
    V = Lp @ Vh[:r].T / np.sqrt(S[:r])
    W = Lq @ U[:, :r] / np.sqrt(S[:r])
    return project_petrov_galerkin(base, V, W)


def _fl_sweeps(base, Qw, shifts, b, metric, cfg):
    """Tangential sweeps ``V = K(shifts)``, ``W = Q_w V``; tracks the best stable iterate."""
    n = base.order
    history = [shifts.copy()]
    movement = []
    best = (math.inf, None)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        Vc = np.empty((n, shifts.size), complex)
        for k, s in enumerate(shifts):
            Vc[:, k] = np.linalg.solve(s * np.eye(n) - base.A, base.B @ b[k])
        V = _orth(_realify_columns(Vc, shifts))
        try:
            proj = project_petrov_galerkin(base, V, Qw @ V)
            red = _stable_part(proj)
            lam, bt, _ = _pole_residues(proj)
        except (SingularProjectedE, np.linalg.LinAlgError, ValueError):
            break
        err = metric(red) if red.order else math.inf
        if err < best[0]:
            best = (err, red)
        mirrored = _mirror(lam, None)
        new = _separate(_clean_conjugates(mirrored))
        move = shift_movement(new, shifts)
        movement.append(move)
        history.append(new.copy())
        d = np.abs(new[:, None] - mirrored[None, :])
        rows, cols = linear_sum_assignment(d)
        perm = np.empty(new.size, int)
        perm[rows] = cols
        b = bt[perm]
        shifts = new
        if move < cfg.conv_tol:
            converged = True
            break
    return best, history, movement, converged, it


def fl_reduce(model: DescriptorModel, cfg: InterpolationConfig) -> IrkaResult:
    """Frequency-limited tangential reduction over the band ``[0, cfg.omega_band]``.

    Sweeps pair a rational Krylov basis ``V`` at the current shifts with
    ``W = Q_w V`` from the band-limited observability gramian, keep the
    stable part of each projection and mirror its poles into new shifts.
    A first chain starts from the band rule (``+-i w_k`` inside the band,
    one real point for odd ``r``); a second starts from the poles of the
    band-limited balanced projection; a two-sided (irka) chain is run as
    well.  The stable iterate with the smallest band-limited H2 error
    (:func:`fl_h2_error`) over all chains is returned.
    """
    if model.dt is not None:
        raise ValueError("fl_reduce works on continuous-time models")
    if cfg.omega_band is None:
        raise ValueError("cfg.omega_band must be set")
    if not is_stable(model):
        raise UnstableModel("fl_reduce requires a stable model")
    omega = float(cfg.omega_band)
    r = int(cfg.r)
    sf = to_standard(model)
    if sf.poly:
        raise ValueError("fl_reduce requires a proper model")
    base = DescriptorModel.from_abcd(sf.A, sf.B, sf.C, sf.D)
    if r > base.order:
        raise ValueError(f"reduced order {r} exceeds model order {base.order}")
    Pw, Qw = fl_gramians(base, omega)

    def metric(red):
        return fl_h2_error(base, red, omega)

    shifts = (np.asarray(cfg.initial_shifts, complex) if cfg.initial_shifts is not None
              else band_initial_shifts(r, omega))
    shifts = _separate(_clean_conjugates(shifts))
    b = np.ones((r, base.n_inputs), complex)
    best, history, movement, converged, it = _fl_sweeps(base, Qw, shifts, b, metric, cfg)
    try:
        bal = _fl_balanced(base, Pw, Qw, r)
        lam, bt, _ = _pole_residues(bal)
    except (SingularProjectedE, np.linalg.LinAlgError, ValueError):
        bal = None
    if bal is not None:
        cand = _stable_part(bal)
        if cand.order:
            err = metric(cand)
            if err < best[0]:
                best = (err, cand)
        mirrored = _mirror(lam, None)
        start = _separate(_clean_conjugates(mirrored))
        d = np.abs(start[:, None] - mirrored[None, :])
        rows, cols = linear_sum_assignment(d)
        perm = np.empty(start.size, int)
        perm[rows] = cols
        best2, hist2, mov2, conv2, it2 = _fl_sweeps(base, Qw, start, bt[perm], metric, cfg)
        if best2[0] < best[0]:
            best = best2
        history += hist2
        movement += mov2
        converged = converged or conv2
        it += it2
    # two-sided chain: identical to irka when the band covers all dynamics
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        try:
            two = irka(base, InterpolationConfig(r, cfg.max_iter, cfg.conv_tol)).model
        except (SingularProjectedE, np.linalg.LinAlgError, ValueError):
            two = None
    if two is not None and is_stable(two):
        err = metric(two)
        if err < best[0]:
            best = (err, two)
    if best[1] is None:
        raise SingularProjectedE("no admissible frequency-limited projection was found")
    if not converged:
        warnings.warn(f"fl_reduce stopped after {it} sweeps without shift convergence",
                      NonConvergenceWarning, stacklevel=2)
    red = best[1]
    if _is_numerically_real(red):
        red = red.real()
    return IrkaResult(red, history, converged, it, movement)


__all__ = [
    "InterpolationConfig", "IrkaResult", "OptimalityReport", "project_petrov_galerkin",
    "tangential_bases", "irka", "check_h2_optimality", "fl_reduce", "band_initial_shifts",
    "fl_h2_error", "band_error", "default_shifts", "shift_movement",
]
