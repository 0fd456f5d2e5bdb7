"""Descriptor LTI models: representation, evaluation, poles, gramians and norms.

Continuous-time models have ``dt=None``; discrete-time models carry their
sampling period ``dt = h > 0``.  Frequency grids are always expressed in
rad/s, so a discrete model is evaluated at ``exp(1j * omega * h)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.linalg import LinAlgWarning

from .errors import (
    DimensionMismatch,
    EmptyGrid,
    IrregularPencil,
    NonPositiveOmega,
    NonProperContinuous,
    PoleAtMapSingularity,
    SingularE,
    SingularResolvent,
    UnstableModel,
)

# relative threshold |beta|*||A|| / (|alpha|*||E||) below which a generalized
# eigenvalue is declared infinite
_INF_EIG_TOL = 1e-10

# resolvents with a smaller reciprocal condition estimate are treated as singular
RCOND_MIN = 1e-20


def _as_matrix(x, rows=None, cols=None):
    a = np.asarray(x)
    if a.dtype.kind not in "fc":
        a = a.astype(float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1) if rows == 1 else a.reshape(-1, 1)
    if a.size == 0:
        a = a.reshape(rows if rows is not None else a.shape[0],
                      cols if cols is not None else (a.shape[1] if a.ndim == 2 else 0))
    return a


def _freeze(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DescriptorModel:
    """Finite-dimensional realization ``E x' = A x + B u``, ``y = C x + D u``.

    Parameters
    ----------
    E, A
        Square matrices of order ``n``.
    B, C, D
        Input, output and feedthrough matrices.
    dt
        ``None`` for continuous time, otherwise the sampling period ``h``.
    """

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        A = _as_matrix(self.A)
        n = A.shape[0]
        E = np.eye(n) if self.E is None else _as_matrix(self.E)
        B = _as_matrix(self.B, rows=n)
        C = _as_matrix(self.C, cols=n)
        if B.ndim != 2 or C.ndim != 2:
            raise DimensionMismatch("B and C must be matrices")
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else _as_matrix(self.D)
        if A.shape != (n, n) or E.shape != (n, n):
            raise DimensionMismatch(f"E {E.shape} and A {A.shape} must be square of equal order")
        if B.shape[0] != n or C.shape[1] != n:
            raise DimensionMismatch(f"B {B.shape} / C {C.shape} inconsistent with order {n}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise DimensionMismatch(f"D {D.shape} must be {(C.shape[0], B.shape[1])}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("sampling period dt must be positive")
        for name, val in zip("EABCD", (E, A, B, C, D)):
            object.__setattr__(self, name, _freeze(val))
        if self.dt is not None:
            object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_abcd(cls, A, B, C, D=None, dt=None):
        """Standard state-space model (``E = I``)."""
        A = _as_matrix(A)
        return cls(np.eye(A.shape[0]), A, B, C, D, dt)

    @classmethod
    def static_gain(cls, D, dt=None):
        D = _as_matrix(D)
        return cls(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, D.shape[1])),
                   np.zeros((D.shape[0], 0)), D, dt)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    @property
    def is_real(self) -> bool:
        return all(np.isrealobj(m) for m in (self.E, self.A, self.B, self.C, self.D))

    def __call__(self, xi):
        return eval_transfer(self, xi)

    def __repr__(self):
        dom = "continuous" if self.dt is None else f"discrete(h={self.dt:g})"
        return (f"DescriptorModel(order={self.order}, inputs={self.n_inputs}, "
                f"outputs={self.n_outputs}, {dom})")

    def _check_compatible(self, other):
        if (self.n_inputs, self.n_outputs) != (other.n_inputs, other.n_outputs):
            raise DimensionMismatch("models have different input/output dimensions")
        if self.dt != other.dt:
            raise DimensionMismatch("models live in different time domains")

    def __add__(self, other):
        self._check_compatible(other)
        return DescriptorModel(
            spla.block_diag(self.E, other.E),
            spla.block_diag(self.A, other.A),
            np.vstack([self.B, other.B]),
            np.hstack([self.C, other.C]),
            self.D + other.D,
            self.dt,
        )

    def __neg__(self):
        return DescriptorModel(self.E, self.A, self.B, -self.C, -self.D, self.dt)

    def __sub__(self, other):
        return self + (-other)

    def real(self) -> "DescriptorModel":
        """Drop (roundoff-level) imaginary parts of the realization."""
        return DescriptorModel(*(np.real(m) for m in (self.E, self.A, self.B, self.C, self.D)),
                               self.dt)


@dataclass(frozen=True, eq=False)
class DelayedDescriptorModel:
    """Descriptor model with two internal state delays and one output delay.

    ``E x'(t) = A0 x(t) + A1 x(t - tau1) + A2 x(t - tau2) + B u(t)``,
    ``y(t) = C0 x(t) + C1 x(t - tau_m)``.

    ``derivative_chain`` optionally lists algebraic states that carry the
    successive time derivatives of input ``chain_input`` (state ``k`` of the
    chain equals the ``k``-th derivative).  Simulators substitute these states
    with the analytically known signal derivatives.
    """

    E: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    B: np.ndarray
    C0: np.ndarray
    C1: np.ndarray
    tau1: float = 0.0
    tau2: float = 0.0
    tau_m: float = 0.0
    derivative_chain: tuple = ()
    chain_input: int | None = None
    rank_E: int = field(init=False)

    def __post_init__(self):
        A0 = _as_matrix(self.A0)
        n = A0.shape[0]
        mats = {
            "E": np.eye(n) if self.E is None else _as_matrix(self.E),
            "A0": A0,
            "A1": np.zeros((n, n)) if self.A1 is None else _as_matrix(self.A1),
            "A2": np.zeros((n, n)) if self.A2 is None else _as_matrix(self.A2),
            "B": _as_matrix(self.B, rows=n),
            "C0": _as_matrix(self.C0, cols=n),
        }
        mats["C1"] = (np.zeros_like(mats["C0"]) if self.C1 is None
                      else _as_matrix(self.C1, cols=n))
        for k in ("E", "A0", "A1", "A2"):
            if mats[k].shape != (n, n):
                raise DimensionMismatch(f"{k} must be {n}x{n}, got {mats[k].shape}")
        if mats["B"].shape[0] != n or mats["C0"].shape[1] != n:
            raise DimensionMismatch("B/C0 inconsistent with state dimension")
        if mats["C1"].shape != mats["C0"].shape:
            raise DimensionMismatch("C0 and C1 must have the same shape")
        if not (0 <= self.tau1 <= self.tau2) or self.tau_m < 0:
            raise ValueError("delays must satisfy 0 <= tau1 <= tau2 and tau_m >= 0")
        for k, v in mats.items():
            object.__setattr__(self, k, _freeze(v))
        object.__setattr__(self, "tau1", float(self.tau1))
        object.__setattr__(self, "tau2", float(self.tau2))
        object.__setattr__(self, "tau_m", float(self.tau_m))
        object.__setattr__(self, "derivative_chain", tuple(int(i) for i in self.derivative_chain))
        object.__setattr__(self, "rank_E", int(np.linalg.matrix_rank(mats["E"])) if n else 0)

    dt = None

    @property
    def order(self) -> int:
        return self.A0.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C0.shape[0]

    @property
    def is_discrete(self) -> bool:
        return False

    def __call__(self, xi):
        return eval_transfer(self, xi)

    def collapse(self) -> DescriptorModel:
        """Delay-free descriptor model obtained by setting every delay to zero."""
        return DescriptorModel(self.E, self.A0 + self.A1 + self.A2, self.B,
                               self.C0 + self.C1, None)


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing, nonnegative frequencies in rad/s."""

    points: np.ndarray
    spacing: str = "explicit"

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise EmptyGrid("frequency grid is empty")
        if np.any(pts < 0) or np.any(np.diff(pts) <= 0):
            raise ValueError("grid must be nonnegative and strictly increasing")
        object.__setattr__(self, "points", _freeze(pts))

    @classmethod
    def logspace(cls, lo, hi, num):
        return cls(np.logspace(math.log10(lo), math.log10(hi), num), "logarithmic")

    @classmethod
    def linspace(cls, lo, hi, num):
        return cls(np.linspace(lo, hi, num), "linear")

    def __len__(self):
        return self.points.size

    def __iter__(self):
        return iter(self.points)


# ---------------------------------------------------------------------------
# evaluation

def _solve_resolvent(M, B, xi=None, index=None):
    """Solve ``M X = B``; a reciprocal condition estimate below ``RCOND_MIN`` is singular."""
    M = np.asarray(M)
    if M.shape[0] == 0:
        return np.zeros((0, B.shape[1]), dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        try:
            with np.errstate(divide="raise", invalid="raise", over="raise"):
                lu, piv = spla.lu_factor(M, check_finite=False)
                gecon = spla.get_lapack_funcs("gecon", (lu,))
                rcond, info = gecon(lu, np.linalg.norm(M, 1), norm="1")
                if info != 0 or not rcond >= RCOND_MIN:
                    raise np.linalg.LinAlgError(f"reciprocal condition {rcond:.3g}")
                X = spla.lu_solve((lu, piv), B, check_finite=False)
            if not np.all(np.isfinite(X)):
                raise np.linalg.LinAlgError("non-finite solution")
            return X
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            raise SingularResolvent(f"resolvent singular at xi={xi}: {exc}",
                                    index=index, point=xi) from None


def eval_transfer(model, xi, *, _index=None):
    """Transfer matrix ``H(xi)`` of a plain or delayed descriptor model."""
    xi = complex(xi)
    if isinstance(model, DelayedDescriptorModel):
        M = (xi * model.E - model.A0 - model.A1 * np.exp(-model.tau1 * xi)
             - model.A2 * np.exp(-model.tau2 * xi))
        X = _solve_resolvent(M, model.B, xi, _index)
        Cx = model.C0 + model.C1 * np.exp(-model.tau_m * xi)
        return Cx @ X
    if model.order == 0:
        return model.D.astype(complex)
    X = _solve_resolvent(xi * model.E - model.A, model.B, xi, _index)
    return model.C @ X + model.D


def eval_derivative(model: DescriptorModel, xi):
    """``dH/dxi = -C (xi E - A)^{-1} E (xi E - A)^{-1} B``."""
    xi = complex(xi)
    M = xi * model.E - model.A
    X = _solve_resolvent(M, model.B, xi)
    Y = _solve_resolvent(M, model.E @ X, xi)
    return -model.C @ Y


def _grid_points(grid):
    if isinstance(grid, FrequencyGrid):
        return grid.points
    pts = np.atleast_1d(np.asarray(grid, dtype=float))
    if pts.size == 0:
        raise EmptyGrid("frequency grid is empty")
    return pts


def evaluation_points(model, omega):
    """Complex evaluation points for frequencies ``omega`` (rad/s)."""
    omega = np.asarray(omega, dtype=float)
    if getattr(model, "dt", None) is not None:
        return np.exp(1j * omega * model.dt)
    return 1j * omega


def eval_many(model, points) -> np.ndarray:
    """Evaluate at an array of complex points, shape ``(K, n_y, n_u)``."""
    points = np.atleast_1d(np.asarray(points, dtype=complex))
    out = np.empty((points.size, model.n_outputs, model.n_inputs), dtype=complex)
    for k, xi in enumerate(points):
        out[k] = eval_transfer(model, xi, _index=k)
    return out


def frequency_response(model, grid) -> np.ndarray:
    """Response samples on ``grid``; one ``(n_y, n_u)`` matrix per frequency."""
    omega = _grid_points(grid)
    return eval_many(model, evaluation_points(model, omega))


def sigma_max(H: np.ndarray) -> np.ndarray:
    """Largest singular value of each matrix in a stack."""
    H = np.asarray(H)
    if H.ndim == 2:
        return float(np.linalg.svd(H, compute_uv=False)[0]) if H.size else 0.0
    if H.shape[1] == 1 or H.shape[2] == 1:
        return np.sqrt(np.sum(np.abs(H) ** 2, axis=(1, 2)))
    return np.linalg.svd(H, compute_uv=False)[:, 0]


# ---------------------------------------------------------------------------
# spectral analysis

def _generalized_eigs(model: DescriptorModel):
    n = model.order
    if n == 0:
        return np.zeros(0, complex), 0
    nA = np.linalg.norm(model.A)
    nE = np.linalg.norm(model.E)
    if nA == 0 and nE == 0:
        raise IrregularPencil("E and A are both zero")
    w, _ = spla.eig(model.A, model.E, homogeneous_eigvals=True, left=False, right=True)
    alpha, beta = w[0], w[1]
    scale = 100 * n * np.finfo(float).eps
    tiny = (np.abs(alpha) <= scale * max(nA, nE)) & (np.abs(beta) <= scale * max(nA, nE))
    if np.any(tiny):
        raise IrregularPencil("pencil (lambda E - A) is singular (0/0 eigenvalue)")
    if nE == 0:
        return np.zeros(0, complex), n
    inf_mask = np.abs(beta) * max(nA, 1e-300) <= _INF_EIG_TOL * np.abs(alpha) * nE
    finite = alpha[~inf_mask] / beta[~inf_mask]
    return finite, int(np.count_nonzero(inf_mask))


def poles(model: DescriptorModel) -> np.ndarray:
    """Finite generalized eigenvalues of ``(A, E)``."""
    return _generalized_eigs(model)[0]


def infinite_eigenvalue_count(model: DescriptorModel) -> int:
    return _generalized_eigs(model)[1]


def _in_stability_region(p, dt):
    p = np.asarray(p)
    if dt is None:
        return p.real < 0
    return np.abs(p) < 1


def is_stable(model: DescriptorModel) -> bool:
    """All finite poles in the open left half plane (continuous) or open unit disk."""
    return bool(np.all(_in_stability_region(poles(model), model.dt)))


def _require_stable(model):
    if not is_stable(model):
        raise UnstableModel("model has poles outside the stability region")


# ---------------------------------------------------------------------------
# additive decomposition of the pencil

def additive_split(model: DescriptorModel, select):
    """Split ``H = H1 + H2 + D`` along a partition of the generalized spectrum.

    ``select(alpha, beta)`` returns a boolean mask of the eigenvalues that go
    to ``H1``.  The pencil is brought to ordered real generalized Schur form
    and decoupled with a generalized Sylvester equation.  Both returned parts
    have zero feedthrough.
    """
    if not model.is_real:
        raise TypeError("additive_split needs a real realization")
    n = model.order
    A, E, B, C = (np.asarray(m, float) for m in (model.A, model.E, model.B, model.C))
    ny, nu = model.n_outputs, model.n_inputs

    def empty():
        return DescriptorModel(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, nu)),
                               np.zeros((ny, 0)), np.zeros((ny, nu)), model.dt)

    if n == 0:
        return empty(), empty()
    AA, EE, alpha, beta, Q, Z = spla.ordqz(A, E, sort=select, output="real")
    k = int(np.count_nonzero(select(alpha, beta)))
    Bt = Q.T @ B
    Ct = C @ Z
    if k == 0:
        return empty(), DescriptorModel(EE, AA, Bt, Ct, None, model.dt)
    if k == n:
        return DescriptorModel(EE, AA, Bt, Ct, None, model.dt), empty()
    A11, A12, A22 = AA[:k, :k], AA[:k, k:], AA[k:, k:]
    E11, E12, E22 = EE[:k, :k], EE[:k, k:], EE[k:, k:]
    R, Lp, scale, _, info = spla.lapack.dtgsyl(A11, A22, -A12, E11, E22, -E12)
    if info < 0 or scale == 0:
        raise SingularE(f"generalized Sylvester separation failed (info={info})")
    R = R / scale
    L = -Lp / scale
    B1 = Bt[:k] + L @ Bt[k:]
    C2 = Ct[:, :k] @ R + Ct[:, k:]
    H1 = DescriptorModel(E11, A11, B1, Ct[:, :k], None, model.dt)
    H2 = DescriptorModel(E22, A22, Bt[k:], C2, None, model.dt)
    return H1, H2


def _finite_mask(model):
    nA = max(np.linalg.norm(model.A), 1e-300)
    nE = np.linalg.norm(model.E)

    def select(alpha, beta):
        return np.abs(beta) * nA > _INF_EIG_TOL * np.abs(alpha) * nE

    return select


@dataclass(frozen=True)
class StandardForm:
    """``x' = A x + B u``, ``y = C x + D u + sum_k s^k P_k u`` (``P_k`` in ``poly``)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    poly: tuple = ()


def to_standard(model: DescriptorModel) -> StandardForm:
    """Fold ``E`` into the realization; split off the infinite part if ``E`` is singular."""
    n = model.order
    if n == 0:
        return StandardForm(model.A, model.B, model.C, np.array(model.D))
    E = model.E
    if np.linalg.cond(E) < 1e12:
        lu = spla.lu_factor(E)
        return StandardForm(spla.lu_solve(lu, model.A), spla.lu_solve(lu, model.B),
                            np.array(model.C), np.array(model.D))
    fin, inf = additive_split(model, _finite_mask(model))
    D = np.array(model.D, dtype=float)
    poly = []
    if inf.order:
        # nilpotent part: H_inf(s) = -sum_k s^k C (A^-1 E)^k A^-1 B
        lu = spla.lu_factor(inf.A)
        N = spla.lu_solve(lu, inf.E)
        X = spla.lu_solve(lu, inf.B)
        D = D - inf.C @ X
        for _ in range(1, inf.order):
            X = N @ X
            term = -inf.C @ X
            poly.append(term)
        while poly and np.linalg.norm(poly[-1]) <= 1e-10 * max(1.0, np.linalg.norm(D)):
            poly.pop()
    if fin.order:
        lu = spla.lu_factor(fin.E)
        A, B = spla.lu_solve(lu, fin.A), spla.lu_solve(lu, fin.B)
    else:
        A, B = fin.A, fin.B
    return StandardForm(A, B, np.array(fin.C), D, tuple(poly))


# ---------------------------------------------------------------------------
# gramians and norms

def _sym(X):
    return 0.5 * (X + X.conj().T)


def gramians(model: DescriptorModel):
    """Controllability and observability gramians ``(P, Q)``.

    Continuous: ``A P + P A' + B B' = 0``.  Discrete: ``A P A' - P + B B' = 0``.
    """
    _require_stable(model)
    sf = to_standard(model)
    return _gramians_standard(sf.A, sf.B, sf.C, model.dt)


def _gramians_standard(A, B, C, dt):
    if A.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    if dt is None:
        P = spla.solve_continuous_lyapunov(A, -B @ B.conj().T)
        Q = spla.solve_continuous_lyapunov(A.conj().T, -C.conj().T @ C)
    else:
        P = spla.solve_discrete_lyapunov(A, B @ B.conj().T)
        Q = spla.solve_discrete_lyapunov(A.conj().T, C.conj().T @ C)
    return _sym(P), _sym(Q)


def _feedthrough_is_zero(sf: StandardForm) -> bool:
    scale = max(1.0, np.linalg.norm(sf.C) * np.linalg.norm(sf.B))
    return np.linalg.norm(sf.D) <= 1e-12 * scale and not sf.poly


def h2_norm(model: DescriptorModel) -> float:
    """H2 norm ``sqrt(trace(C P C'))`` (plus ``trace(D D')`` in discrete time)."""
    _require_stable(model)
    sf = to_standard(model)
    if sf.poly:
        raise NonProperContinuous("model has a polynomial part; H2 norm is infinite")
    if model.dt is None and not _feedthrough_is_zero(sf):
        raise NonProperContinuous("continuous-time H2 norm requires D = 0")
    P, _ = _gramians_standard(sf.A, sf.B, sf.C, model.dt)
    val = np.trace(sf.C @ P @ sf.C.conj().T).real if sf.A.shape[0] else 0.0
    if model.dt is not None:
        val += np.trace(sf.D @ sf.D.conj().T).real
    return float(math.sqrt(max(val, 0.0)))


def _default_hinf_grid(model):
    if model.dt is None:
        base = np.logspace(-3, 3, 400)
        top = np.inf
    else:
        top = math.pi / model.dt
        base = top * np.logspace(-5, 0, 400)
    extra = [0.0]
    if isinstance(model, DescriptorModel) and model.order:
        p = poles(model)
        if model.dt is None:
            extra.extend(np.abs(p.imag))
            extra.extend(np.abs(p))
        else:
            extra.extend(np.abs(np.angle(p)) / model.dt)
    pts = np.concatenate([base, np.asarray(extra, float)])
    pts = pts[np.isfinite(pts) & (pts >= 0) & (pts <= top)]
    return np.unique(pts)


def _golden_max(f, a, b, rtol, max_iter=200):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if (b - a) <= rtol * max(abs(a), abs(b), 1e-300):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def hinf_norm(model, grid=None, refine_tol: float = 1e-8, n_refine: int = 3):
    """Peak gain by grid sweep plus golden-section refinement.

    Returns ``(value, peak_frequency)`` with the frequency in rad/s.  The value
    is a lower bound on the true H-infinity norm.
    """
    if isinstance(model, DescriptorModel):
        _require_stable(model)
        if model.order == 0:
            return sigma_max(np.asarray(model.D)), 0.0
    omega = _default_hinf_grid(model) if grid is None else np.asarray(_grid_points(grid), float)
    gains = np.atleast_1d(sigma_max(frequency_response(model, omega)))

    def gain(w):
        return sigma_max(eval_transfer(model, evaluation_points(model, w)))

    best_val = float(gains.max())
    best_w = float(omega[int(gains.argmax())])
    # refine the strongest local maxima
    interior = [k for k in range(len(omega))
                if (k == 0 or gains[k] >= gains[k - 1])
                and (k == len(omega) - 1 or gains[k] >= gains[k + 1])]
    interior.sort(key=lambda k: -gains[k])
    for k in interior[:n_refine]:
        lo = omega[max(k - 1, 0)]
        hi = omega[min(k + 1, len(omega) - 1)]
        if hi <= lo:
            continue
        w, val = _golden_max(gain, lo, hi, refine_tol)
        if val > best_val:
            best_val, best_w = float(val), float(w)
    return best_val, best_w


def _stable_log_selector(A, omega):
    """Real matrix ``S = (1/2pi) int_{-w}^{w} (i nu I - A)^{-1} d nu`` for stable ``A``."""
    n = A.shape[0]
    if math.isinf(omega):
        return 0.5 * np.eye(n)
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) < 1e8:
        s = (np.log(1j * omega - lam) - np.log(-1j * omega - lam)) / (2j * math.pi)
        S = (V * s) @ np.linalg.inv(V)
    else:
        I = np.eye(n)
        S = (spla.logm(1j * omega * I - A) - spla.logm(-1j * omega * I - A)) / (2j * math.pi)
    return np.real(S)


def fl_gramians(model: DescriptorModel, omega: float):
    """Frequency-limited gramians ``(P_w, Q_w)`` over the band ``[-w, w]``."""
    if model.dt is not None:
        raise ValueError("frequency-limited gramians are defined for continuous models")
    if omega < 0 or math.isnan(omega):
        raise NonPositiveOmega(f"band edge must be nonnegative, got {omega}")
    _require_stable(model)
    sf = to_standard(model)
    n = sf.A.shape[0]
    if omega == 0:
        return np.zeros((n, n)), np.zeros((n, n))
    P, Q = _gramians_standard(sf.A, sf.B, sf.C, None)
    S = _stable_log_selector(sf.A, omega)
    Pw = S @ P + P @ S.T
    Qw = S.T @ Q + Q @ S
    return _sym(Pw), _sym(Qw)


def fl_gramian(model: DescriptorModel, omega: float) -> np.ndarray:
    """Frequency-limited controllability gramian over ``[-omega, omega]``."""
    return fl_gramians(model, omega)[0]


def hankel_singular_values(model: DescriptorModel) -> np.ndarray:
    P, Q = gramians(model)
    if P.size == 0:
        return np.zeros(0)
    ev = np.linalg.eigvals(P @ Q)
    return np.sort(np.sqrt(np.clip(ev.real, 0, None)))[::-1]


def dc_gain(model) -> np.ndarray:
    return eval_transfer(model, 1.0 if getattr(model, "dt", None) is not None else 0.0)


# ---------------------------------------------------------------------------
# bilinear maps between the imaginary axis and the unit circle

def _checked_solve(M, rhs, what):
    if M.size == 0:
        return rhs
    if np.linalg.cond(M) > 1e13:
        raise PoleAtMapSingularity(f"pencil has an eigenvalue at the map singularity ({what})")
    return np.linalg.solve(M, rhs)


def bilinear_c2d(model: DescriptorModel, h: float) -> DescriptorModel:
    """Substitute ``s = (2/h)(z - 1)/(z + 1)`` at the realization level."""
    if model.dt is not None:
        raise ValueError("bilinear_c2d expects a continuous model")
    if not h > 0:
        raise ValueError("sampling period must be positive")
    a = 2.0 / h
    E, A, B, C = (np.asarray(x) for x in (model.E, model.A, model.B, model.C))
    Ed = a * E - A
    X = _checked_solve(Ed, B, f"s = {a:g}")
    Bd = 2 * a * E @ X
    Dd = model.D + C @ X
    return DescriptorModel(Ed, a * E + A, Bd, C, Dd, h)


def bilinear_d2c(model: DescriptorModel, h: float | None = None) -> DescriptorModel:
    """Inverse of :func:`bilinear_c2d`: substitute ``z = (1 + s h/2)/(1 - s h/2)``."""
    if model.dt is None:
        raise ValueError("bilinear_d2c expects a discrete model")
    h = model.dt if h is None else h
    E, A, B, C = (np.asarray(x) for x in (model.E, model.A, model.B, model.C))
    Ec = E + A
    X = _checked_solve(Ec, B, "z = -1")
    Bc = 2 * E @ X
    Dc = model.D - C @ X
    return DescriptorModel(0.5 * h * Ec, A - E, Bc, C, Dc, None)


def random_stable_model(rng, order, n_inputs=1, n_outputs=1, *, dt=None,
                        pole_range=(0.1, 10.0), damping=(0.05, 0.9), feedthrough=False,
                        separation=0.1):
    """Random real stable model with prescribed pole magnitudes (block-diagonal modal form).

    Poles are drawn with log-uniform magnitudes in ``pole_range``; complex pairs
    get a damping ratio in ``damping``.  Distinct poles stay at least
    ``separation`` apart relative to the larger magnitude, so the model is
    numerically minimal.  Discrete models map each continuous pole through
    ``exp(p * dt)``.
    """
    chosen = []
    remaining = order
    for _ in range(1000 * max(order, 1)):
        if remaining == 0:
            break
        mag = math.exp(rng.uniform(math.log(pole_range[0]), math.log(pole_range[1])))
        if remaining >= 2 and rng.random() < 0.7:
            zeta = rng.uniform(*damping)
            p = complex(-zeta * mag, mag * math.sqrt(1 - zeta ** 2))
        else:
            p = complex(-mag, 0.0)
        cands = [p, p.conjugate()] if p.imag else [p]
        if any(abs(c - q) < separation * max(abs(c), abs(q)) for c in cands for q in chosen):
            continue
        chosen.extend(cands)
        remaining -= len(cands)
    if remaining:
        raise ValueError("could not place separated poles; lower separation or widen pole_range")
    blocks = []
    for p in chosen:
        if p.imag < 0:
            continue
        if dt is not None:
            p = np.exp(p * dt)
        if p.imag:
            blocks.append(np.array([[p.real, p.imag], [-p.imag, p.real]]))
        else:
            blocks.append(np.array([[p.real]]))
    A = spla.block_diag(*blocks)
    T, _ = np.linalg.qr(rng.standard_normal((order, order)))
    A = T.T @ A @ T
    B = rng.standard_normal((order, n_inputs))
    C = rng.standard_normal((n_outputs, order))
    D = rng.standard_normal((n_outputs, n_inputs)) if feedthrough else None
    return DescriptorModel.from_abcd(A, B, C, D, dt)


def frequency_grid_for(model, lo=1e-2, hi=1e3, num=200) -> FrequencyGrid:
    if getattr(model, "dt", None) is not None:
        top = math.pi / model.dt
        return FrequencyGrid(np.linspace(0, top, num + 1)[1:])
    return FrequencyGrid.logspace(lo, hi, num)


__all__ = [
    "DescriptorModel", "DelayedDescriptorModel", "FrequencyGrid", "StandardForm",
    "eval_transfer", "eval_derivative", "eval_many", "evaluation_points",
    "frequency_response", "sigma_max", "poles", "infinite_eigenvalue_count",
    "is_stable", "additive_split", "to_standard", "gramians", "h2_norm",
    "hinf_norm", "fl_gramian", "fl_gramians", "hankel_singular_values", "dc_gain",
    "bilinear_c2d", "bilinear_d2c",
    "random_stable_model", "frequency_grid_for",
]
