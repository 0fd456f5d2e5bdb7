"""Loewner-framework rational interpolation of tangential frequency data.

Left (row) data are stored as row vectors ``lh[j] = l_j^H`` and
``vh[j] = l_j^H H(mu_j)``; right (column) data as ``r[i]`` and
``w[i] = H(lambda_i) r_i``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousRank,
    CoincidentLeftRight,
    DimensionMismatch,
    DuplicatePoints,
    InsufficientDataWarning,
    NotConjugateClosed,
)
from .lti import DescriptorModel, eval_many

_PAIR_TOL = 1e-12


def _freeze(a):
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TangentialDataSet:
    """Left/right tangential interpolation data with ``m`` points per side."""

    mu: np.ndarray
    lh: np.ndarray
    vh: np.ndarray
    lam: np.ndarray
    r: np.ndarray
    w: np.ndarray
    dt: float | None = None

    def __post_init__(self):
        mu, lam = np.atleast_1d(self.mu), np.atleast_1d(self.lam)
        m = mu.size
        lh, vh = np.atleast_2d(self.lh), np.atleast_2d(self.vh)
        r, w = np.atleast_2d(self.r), np.atleast_2d(self.w)
        if lam.size != m:
            raise DimensionMismatch(f"left/right counts differ ({m} vs {lam.size})")
        if lh.shape[0] != m or vh.shape[0] != m or r.shape[0] != m or w.shape[0] != m:
            raise DimensionMismatch("one direction/value row per interpolation point is required")
        if lh.shape[1] != w.shape[1] or vh.shape[1] != r.shape[1]:
            raise DimensionMismatch("direction and value lengths are inconsistent")
        pts = np.concatenate([mu, lam])
        if _has_duplicates(pts):
            raise DuplicatePoints("interpolation points must be pairwise distinct")
        for name, val in (("mu", mu), ("lh", lh), ("vh", vh), ("lam", lam), ("r", r), ("w", w)):
            object.__setattr__(self, name, _freeze(val))

    @property
    def m(self) -> int:
        return self.mu.size

    @property
    def n_outputs(self) -> int:
        return self.lh.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.r.shape[1]

    @property
    def points(self) -> np.ndarray:
        return np.concatenate([self.mu, self.lam])

    def is_conjugate_closed(self, tol: float = 1e-10) -> bool:
        try:
            _realifier(self.mu, [self.lh, self.vh], tol)
            _realifier(self.lam, [self.r, self.w], tol)
        except NotConjugateClosed:
            return False
        return True


def _has_duplicates(pts):
    pts = np.asarray(pts, complex)
    if pts.size < 2:
        return False
    scale = np.maximum(1.0, np.abs(pts))
    order = np.argsort(pts.real)
    p, s = pts[order], scale[order]
    for k in range(p.size):
        j = k + 1
        while j < p.size and p[j].real - p[k].real <= _PAIR_TOL * max(s[k], s[j]):
            if abs(p[j] - p[k]) <= _PAIR_TOL * max(s[k], s[j]):
                return True
            j += 1
    return False


def _conjugate_groups(points):
    """Group points into conjugate pairs ``(j, k)`` (``Im > 0`` first) or singletons."""
    points = np.asarray(points, complex)
    used = np.zeros(points.size, bool)
    groups = []
    for j in np.argsort(np.abs(points.imag), kind="stable"):
        if used[j]:
            continue
        used[j] = True
        p = points[j]
        tol = _PAIR_TOL * max(1.0, abs(p))
        if abs(p.imag) <= tol:
            groups.append((j,))
            continue
        cand = np.flatnonzero(~used & (np.abs(points - np.conj(p)) <= 1e3 * tol))
        if cand.size:
            k = cand[0]
            used[k] = True
            groups.append((j, k) if p.imag > 0 else (k, j))
        else:
            groups.append((j,))
    return groups


def _realifier(points, blocks, tol=1e-10):
    """Unitary ``T`` mapping a conjugate-closed side to real coordinates.

    Each conjugate pair uses the fixed block ``[[1, -1j], [1, 1j]] / sqrt(2)``;
    real points map to ``1x1`` blocks.  ``blocks`` are the per-point rows
    (directions, values) that must be conjugate on paired points.
    """
    m = len(points)
    T = np.zeros((m, m), complex)
    col = 0
    s = 1 / math.sqrt(2)
    for g in _conjugate_groups(points):
        if len(g) == 1:
            j = g[0]
            if abs(points[j].imag) > _PAIR_TOL * max(1.0, abs(points[j])):
                raise NotConjugateClosed(f"point {points[j]} has no conjugate partner")
            for b in blocks:
                if np.any(np.abs(b[j].imag) > tol * max(1.0, np.abs(b[j]).max())):
                    raise NotConjugateClosed("data at a real point must be real")
            T[j, col] = 1.0
            col += 1
        else:
            j, k = g
            for b in blocks:
                scale = max(1.0, np.abs(b[j]).max())
                if np.any(np.abs(b[k] - np.conj(b[j])) > tol * scale):
                    raise NotConjugateClosed("conjugate points carry non-conjugate data")
            T[j, col], T[k, col] = s, s
            T[j, col + 1], T[k, col + 1] = -1j * s, 1j * s
            col += 2
    return T


def _directions(kind, count, dim, rng):
    if kind == "cycle":
        return [np.eye(dim)[g % dim] for g in range(count)]
    if kind == "random":
        out = []
        for _ in range(count):
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            out.append(v / np.linalg.norm(v))
        return out
    raise ValueError(f"unknown direction policy {kind!r}")


def split_points(points):
    """Alternate conjugate groups (sorted by ``|Im|``) between left and right sides."""
    groups = _conjugate_groups(points)
    groups.sort(key=lambda g: (abs(points[g[0]].imag), points[g[0]].real))
    left, right = [], []
    for gi, g in enumerate(groups):
        (left if gi % 2 == 0 else right).append(g)
    nl = sum(len(g) for g in left)
    nr = sum(len(g) for g in right)
    if nl != nr:
        raise DimensionMismatch(
            f"points do not split into equal halves ({nl} left, {nr} right); "
            "use an even number of conjugate pairs"
        )
    return left, right


def data_from_samples(points, values, directions="cycle", seed=None, dt=None) -> TangentialDataSet:
    """Build tangential data from full transfer samples ``values[k] = H(points[k])``."""
    points = np.atleast_1d(np.asarray(points, complex))
    values = np.asarray(values, complex)
    if values.ndim == 1:
        values = values.reshape(-1, 1, 1)
    if values.shape[0] != points.size:
        raise DimensionMismatch("one sample per point is required")
    if _has_duplicates(points):
        raise DuplicatePoints("interpolation points must be pairwise distinct")
    ny, nu = values.shape[1:]
    rng = np.random.default_rng(seed)
    left, right = split_points(points)
    ldirs = _directions(directions, len(left), ny, rng)
    rdirs = _directions(directions, len(right), nu, rng)
    mu, lh, vh = [], [], []
    for g, d in zip(left, ldirs):
        for idx, j in enumerate(g):
            row = np.conj(d) if idx == 0 else d  # l^H, conjugated on the partner
            mu.append(points[j])
            lh.append(row)
            vh.append(row @ values[j])
    lam, r, w = [], [], []
    for g, d in zip(right, rdirs):
        for idx, j in enumerate(g):
            col = d if idx == 0 else np.conj(d)
            lam.append(points[j])
            r.append(col)
            w.append(values[j] @ col)
    return TangentialDataSet(np.array(mu), np.array(lh), np.array(vh),
                             np.array(lam), np.array(r), np.array(w), dt)


def sample_tangential(model, points, directions="cycle", seed=None) -> TangentialDataSet:
    """Evaluate ``model`` at ``points`` and split them into tangential data."""
    points = np.atleast_1d(np.asarray(points, complex))
    if _has_duplicates(points):
        raise DuplicatePoints("interpolation points must be pairwise distinct")
    values = eval_many(model, points)
    return data_from_samples(points, values, directions, seed, getattr(model, "dt", None))


@dataclass(frozen=True, eq=False)
class LoewnerPencil:
    """Loewner matrix ``LL``, shifted Loewner ``sLL`` and stacked data ``V``, ``W``."""

    LL: np.ndarray
    sLL: np.ndarray
    V: np.ndarray
    W: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    lh: np.ndarray
    r: np.ndarray
    dt: float | None = None

    @property
    def m(self) -> int:
        return self.LL.shape[0]

    def raw_model(self) -> DescriptorModel:
        """Order-``m`` model ``(-LL, -sLL, V, W)``."""
        return DescriptorModel(-self.LL, -self.sLL, self.V, self.W, None, self.dt)


def build_pencil(data: TangentialDataSet) -> LoewnerPencil:
    diff = data.mu[:, None] - data.lam[None, :]
    scale = np.maximum(1.0, np.maximum(np.abs(data.mu)[:, None], np.abs(data.lam)[None, :]))
    if np.any(np.abs(diff) <= _PAIR_TOL * scale):
        raise CoincidentLeftRight("a left point coincides with a right point")
    VR = data.vh @ data.r.T
    LW = data.lh @ data.w.T
    LL = (VR - LW) / diff
    sLL = (data.mu[:, None] * VR - data.lam[None, :] * LW) / diff
    return LoewnerPencil(LL, sLL, np.array(data.vh), np.array(data.w.T),
                         data.mu, data.lam, data.lh, data.r, data.dt)


def _rank(s, tol):
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def _gap_ok(s, n, gap):
    if n == 0 or n >= s.size or s[n] == 0:
        return True
    return s[n - 1] / s[n] >= gap


def _has_interior_gap(s, gap):
    s = s[s > 0]
    return s.size > 1 and bool(np.any(s[:-1] / s[1:] >= gap))


def singular_values(pencil: LoewnerPencil):
    """Singular values of ``[LL, sLL]`` and ``[LL; sLL]``."""
    s1 = np.linalg.svd(np.hstack([pencil.LL, pencil.sLL]), compute_uv=False)
    s2 = np.linalg.svd(np.vstack([pencil.LL, pencil.sLL]), compute_uv=False)
    return s1, s2


def minimal_order(pencil: LoewnerPencil, data: TangentialDataSet | None = None,
                  tol: float = 1e-9, *, gap: float = 1e3, n_checks: int = 5,
                  seed: int = 0, strict: bool = True) -> int:
    """Order ``n`` of the minimal interpolant from the rank of the Loewner pencil.

    ``strict`` demands a singular-value gap of at least ``gap`` at ``n`` and
    agreement of the ranks of ``[LL, sLL]``, ``[LL; sLL]`` and
    ``z_k LL - sLL`` at ``n_checks`` data points ``z_k``; any disagreement
    raises :class:`AmbiguousRank`.  Without ``strict`` the tolerance rank of
    the stacked matrices is returned (used on irrational data where no gap
    exists).
    """
    s1, s2 = singular_values(pencil)
    n1, n2 = _rank(s1, tol), _rank(s2, tol)
    if not strict:
        return min(n1, n2)
    if n1 != n2:
        raise AmbiguousRank(f"rank([LL, sLL]) = {n1} but rank([LL; sLL]) = {n2}")
    n, m = n1, pencil.m
    if not (_gap_ok(s1, n, gap) and _gap_ok(s2, n, gap)):
        raise AmbiguousRank(f"no singular value gap >= {gap:g} at rank {n}")
    if n == m and (_has_interior_gap(s1, gap) or _has_interior_gap(s2, gap)):
        raise AmbiguousRank("tolerance rank is full although the singular values show a plateau")
    pts = data.points if data is not None else np.concatenate([pencil.mu, pencil.lam])
    band = np.sqrt(gap)
    rng = np.random.default_rng(seed)
    for z in rng.choice(pts, size=min(n_checks, pts.size), replace=False):
        sz = np.linalg.svd(z * pencil.LL - pencil.sLL, compute_uv=False)
        # agreement within a tolerance band of sqrt(gap) either side of tol
        lo, hi = _rank(sz, tol * band), _rank(sz, tol / band)
        if not lo <= n <= hi:
            raise AmbiguousRank(f"rank(z LL - sLL) = {_rank(sz, tol)} at z = {z:.4g}, expected {n}")
    return n


def mcmillan_degree(pencil: LoewnerPencil, tol: float = 1e-9) -> int:
    """Numerical rank of ``LL``: McMillan degree of the interpolant's proper rational part."""
    return _rank(np.linalg.svd(pencil.LL, compute_uv=False), tol)


def realify(pencil: LoewnerPencil, tol: float = 1e-8) -> LoewnerPencil:
    """Apply the blockwise conjugate-pair unitary transform; the result is real."""
    TL = _realifier(pencil.mu, [pencil.lh, pencil.V], tol)
    TR = _realifier(pencil.lam, [pencil.r, pencil.W.T], tol)
    LL = TL.conj().T @ pencil.LL @ TR
    sLL = TL.conj().T @ pencil.sLL @ TR
    V = TL.conj().T @ pencil.V
    W = pencil.W @ TR
    for M in (LL, sLL, V, W):
        if M.size and np.abs(M.imag).max() > tol * max(1.0, np.abs(M).max()):
            raise NotConjugateClosed("data are not closed under conjugation")
    return LoewnerPencil(LL.real, sLL.real, V.real, W.real, pencil.mu, pencil.lam,
                         pencil.lh, pencil.r, pencil.dt)


def compress(pencil: LoewnerPencil, n: int, real: bool = True) -> DescriptorModel:
    """Project the Loewner realization onto the leading ``n`` singular directions."""
    m = pencil.m
    if not 0 <= n <= m:
        raise ValueError(f"order must satisfy 0 <= n <= m = {m}")
    p = realify(pencil) if real else pencil
    ny, nu = p.W.shape[0], p.V.shape[1]
    if n == 0:
        return DescriptorModel(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, nu)),
                               np.zeros((ny, 0)), None, p.dt)
    U, _, _ = np.linalg.svd(np.hstack([p.LL, p.sLL]), full_matrices=False)
    _, _, Vh = np.linalg.svd(np.vstack([p.LL, p.sLL]), full_matrices=False)
    Y = U[:, :n]
    X = Vh[:n].conj().T
    YH = Y.conj().T
    return DescriptorModel(-YH @ p.LL @ X, -YH @ p.sLL @ X, YH @ p.V, p.W @ X, None, p.dt)


def interpolation_residuals(model, data: TangentialDataSet):
    """Relative tangential residuals on the left and right data."""
    Hmu = eval_many(model, data.mu)
    Hlam = eval_many(model, data.lam)
    left = np.einsum("ji,jik->jk", data.lh, Hmu) - data.vh
    right = np.einsum("jki,ji->jk", Hlam, data.r) - data.w
    lref = np.maximum(np.linalg.norm(data.vh, axis=1), 1e-300)
    rref = np.maximum(np.linalg.norm(data.w, axis=1), 1e-300)
    lres = np.linalg.norm(left, axis=1)
    rres = np.linalg.norm(right, axis=1)
    # zero data: report absolute residuals
    lres = np.where(np.linalg.norm(data.vh, axis=1) > 0, lres / lref, lres)
    rres = np.where(np.linalg.norm(data.w, axis=1) > 0, rres / rref, rres)
    return lres, rres


def interpolate(data: TangentialDataSet, tol: float = 1e-9, real: bool | None = None,
                strict: bool = True) -> DescriptorModel:
    """Minimal (real, when the data allow it) descriptor interpolant of ``data``."""
    pencil = build_pencil(data)
    if real is None:
        real = data.is_conjugate_closed()
    n = minimal_order(pencil, data, tol, strict=strict)
    if n == pencil.m:
        warnings.warn(
            f"Loewner pencil has full rank {n}; the data may not determine a minimal "
            "model (interpolation is exact but possibly not minimal)",
            InsufficientDataWarning, stacklevel=2,
        )
    return compress(pencil, n, real)


# ---------------------------------------------------------------------------
# CSV exchange

def write_data_csv(path, data: TangentialDataSet) -> None:
    """Rows: side, re/im point, re/im direction entries, re/im value entries.

    ``mu`` rows hold the row vectors ``l^H`` and ``v^H``; ``lambda`` rows hold
    ``r`` and ``w``.
    """
    dom = "continuous" if data.dt is None else f"discrete:{data.dt!r}"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"#n_outputs={data.n_outputs}", f"n_inputs={data.n_inputs}", f"domain={dom}"])

        def emit(side, p, d, v):
            wr.writerow([side, repr(float(p.real)), repr(float(p.imag))]
                        + [repr(float(x)) for x in d.real] + [repr(float(x)) for x in d.imag]
                        + [repr(float(x)) for x in v.real] + [repr(float(x)) for x in v.imag])

        for j in range(data.m):
            emit("mu", data.mu[j], data.lh[j], data.vh[j])
        for i in range(data.m):
            emit("lambda", data.lam[i], data.r[i], data.w[i])


def read_data_csv(path) -> TangentialDataSet:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    meta = dict(item.lstrip("#").split("=", 1) for item in rows[0])
    ny, nu = int(meta["n_outputs"]), int(meta["n_inputs"])
    dom = meta.get("domain", "continuous")
    dt = None if dom == "continuous" else float(dom.split(":", 1)[1])
    left, right = [], []
    for row in rows[1:]:
        if not row:
            continue
        side, vals = row[0], np.array([float(x) for x in row[1:]])
        p = complex(vals[0], vals[1])
        k = ny if side == "mu" else nu
        q = nu if side == "mu" else ny
        d = vals[2:2 + k] + 1j * vals[2 + k:2 + 2 * k]
        v = vals[2 + 2 * k:2 + 2 * k + q] + 1j * vals[2 + 2 * k + q:2 + 2 * k + 2 * q]
        (left if side == "mu" else right).append((p, d, v))
    if not left or len(left) != len(right):
        raise DimensionMismatch("data file must contain equally many mu and lambda rows")
    mu, lh, vh = map(np.array, zip(*left))
    lam, r, w = map(np.array, zip(*right))
    return TangentialDataSet(mu, lh, vh, lam, r, w, dt)
