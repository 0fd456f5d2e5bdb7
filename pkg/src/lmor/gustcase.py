"""Synthetic gust-load benchmark.

A seeded aeroelastic-like plant with the delayed descriptor structure, the
1-cosine gust family, a fixed-step sampled-data closed-loop simulator and
the envelope gain metric.

Plant signals
-------------
inputs   ``[delta_mc, w_g, u_HT, u_in, u_out]`` (pilot tail command, gust
         velocity in ft/s, three control surface commands)
outputs  ``[y, n_z, M(x_1), ..., M(x_5)]`` where ``y`` is the nose
         angle-of-attack vane (delayed by ``tau_m``) and ``M(x_i)`` are wing
         bending loads at the stations.

The gust enters through an algebraic derivative chain ``g = (w, w', w'')``
(singular ``E``) so ``eval_transfer`` carries the ``s``, ``s^2`` multipliers;
the simulator replaces the chain by the known gust derivatives and
integrates the remaining invertible block.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import IncompatibleRates, UnstableSimulation, ZeroBaselinePeak
from .lti import DelayedDescriptorModel, DescriptorModel, to_standard

FT = 0.3048
G0 = 9.81

N_U, N_Y, N_Z = 3, 1, 6
PILOT, GUST = 0, 1


@dataclass(frozen=True)
class GustProfile:
    """1-cosine gust of amplitude ``W`` (ft/s), wavelength ``L`` (m) at airspeed ``V`` (m/s)."""

    W: float
    L: float
    V: float

    def __post_init__(self):
        if not (self.W > 0 and self.L > 0 and self.V > 0):
            raise ValueError("gust W, L and V must be positive")

    @property
    def duration(self) -> float:
        return 2 * self.L / self.V

    def scaled(self, factor: float) -> "GustProfile":
        return GustProfile(self.W * factor, self.L, self.V)


@dataclass(frozen=True)
class GustSet:
    profiles: tuple

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if not self.profiles:
            raise ValueError("gust set is empty")

    def __iter__(self):
        return iter(self.profiles)

    def __len__(self):
        return len(self.profiles)

    def to_dict(self) -> dict:
        return {"profiles": [{"W": p.W, "L": p.L, "V": p.V} for p in self.profiles]}

    @classmethod
    def from_dict(cls, d: dict) -> "GustSet":
        return cls(tuple(GustProfile(float(p["W"]), float(p["L"]), float(p["V"]))
                         for p in d["profiles"]))


def design_gust_velocity(L: float, u_ref: float = 56.0) -> float:
    """Amplitude scaling ``W = u_ref (L / 106.17)^(1/6)`` (ft/s, ``L`` in m)."""
    return u_ref * (L / 106.17) ** (1 / 6)


def default_gust_set(V: float = 200.0, n: int = 10, L_range=(30.0, 350.0)) -> GustSet:
    """``n`` profiles with ``L`` log-spaced over ``L_range``."""
    Ls = np.geomspace(L_range[0], L_range[1], n)
    return GustSet(tuple(GustProfile(design_gust_velocity(L), float(L), V) for L in Ls))


def gust_signal(p: GustProfile, t):
    """``(w, dw, ddw)`` of the 1-cosine profile at ``t`` (scalar or array).

    ``ddw`` takes its interior value at ``t = 0`` and is zero from
    ``t = 2L/V`` on.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("gust time must be nonnegative")
    a = math.pi * p.V / p.L
    on = t < p.duration
    half = 0.5 * p.W
    w = np.where(on, half * (1 - np.cos(a * t)), 0.0)
    dw = np.where(on, half * a * np.sin(a * t), 0.0)
    ddw = np.where(on, half * a * a * np.cos(a * t), 0.0)
    if t.ndim == 0:
        return float(w), float(dw), float(ddw)
    return w, dw, ddw


def input_channel_expand(omega: float, tau1: float, tau2: float) -> np.ndarray:
    """10x2 multiplier from ``[delta_mc; w_g]`` to the stacked front/middle/rear gust triples."""
    s = 1j * float(omega)
    M = np.zeros((10, 2), dtype=complex)
    M[0, 0] = 1.0
    for k, tau in enumerate((0.0, tau1, tau2)):
        d = np.exp(-tau * s)
        M[1 + 3 * k:4 + 3 * k, 1] = [d, s * d, s * s * d]
    return M


@dataclass(frozen=True)
class EnvelopeConfig:
    """Wing stations (m) and the performance-output row holding each station's load."""

    stations: tuple = (1.0, 2.5, 4.0, 5.5, 7.0)
    load_output_indices: dict = None

    def __post_init__(self):
        st = tuple(float(x) for x in self.stations)
        if not st or any(b <= a for a, b in zip(st, st[1:])):
            raise ValueError("stations must be nonempty and strictly increasing")
        object.__setattr__(self, "stations", st)
        idx = self.load_output_indices
        if idx is None:
            idx = {x: 1 + i for i, x in enumerate(st)}
        idx = {float(k): int(v) for k, v in dict(idx).items()}
        if set(idx) != set(st):
            raise ValueError("load_output_indices must map every station")
        object.__setattr__(self, "load_output_indices", idx)


@dataclass(frozen=True)
class SyntheticAircraftConfig:
    """Parameters of :func:`make_synthetic_aircraft`. Delays in seconds."""

    n_modes: int = 4
    damping: tuple = (0.02, 0.05)
    freq_range: tuple = (12.0, 60.0)
    tau1: float = 0.04
    tau2: float = 0.08
    tau_m: float = 0.02
    V: float = 200.0
    actuator_bandwidth: float = 40.0
    stations: tuple = (1.0, 2.5, 4.0, 5.5, 7.0)
    semi_span: float = 8.0
    n_u: int = N_U
    n_y: int = N_Y
    n_z: int = N_Z
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.tau1 < self.tau2:
            raise ValueError("need 0 < tau1 < tau2")
        if self.tau_m < 0:
            raise ValueError("tau_m must be nonnegative")
        if self.n_modes < 0:
            raise ValueError("n_modes must be nonnegative")
        if not 0 < self.freq_range[0] <= self.freq_range[1]:
            raise ValueError("mode frequencies must be positive")
        if not 0 < self.damping[0] <= self.damping[1] < 1:
            raise ValueError("damping range must lie in (0, 1)")
        if (self.n_u, self.n_y, self.n_z) != (N_U, N_Y, N_Z):
            raise ValueError("the benchmark plant has n_u=3, n_y=1, n_z=6")
        if len(self.stations) != N_Z - 1 or max(self.stations) >= self.semi_span:
            raise ValueError("need five stations inside the semi-span")


def make_synthetic_aircraft(cfg: SyntheticAircraftConfig = SyntheticAircraftConfig()):
    """Seeded delayed descriptor plant of the gust benchmark.

    State layout: actuators ``(d_HT, d_in, d_out)``, short period
    ``(alpha, q)``, wing lift lag ``l``, modal pairs ``(eta_k, eta_k')``,
    gust chain ``(g0, g1, g2)``.  The gust reaches the fuselage nose at
    ``t``, the wing at ``t - tau1`` and the tail at ``t - tau2``; the
    delayed gust couplings sit in ``A1`` and ``A2``.
    """
    rng = np.random.default_rng(cfg.seed)
    nm = cfg.n_modes
    ia = np.arange(3)
    ial, iq, il = 3, 4, 5
    ie = 6 + 2 * np.arange(nm)
    ied = ie + 1
    ic = 6 + 2 * nm + np.arange(3)
    n = ic[-1] + 1
    E, A0, A1, A2 = (np.zeros((n, n)) for _ in range(4))
    B = np.zeros((n, 5))
    E[np.arange(6 + 2 * nm), np.arange(6 + 2 * nm)] = 1.0
    gv = FT / cfg.V  # gust velocity (ft/s) to angle

    # actuators; the pilot command adds to the tail command
    wa = cfg.actuator_bandwidth
    A0[ia, ia] = -wa
    B[ia, 2 + ia] = wa
    B[0, PILOT] = wa

    jit = lambda x, r=0.1: x * (1 + r * rng.uniform(-1, 1))  # noqa: E731
    Z_l, Z_a, Z_d = jit(-1.2), jit(-0.3), jit(-0.12)
    M_l, M_a, M_q, M_d = jit(0.8), jit(-7.0), jit(-2.2), jit(-6.0)
    M_nose = jit(0.4)
    T_l = jit(0.03)
    k_in, k_out = jit(0.35), jit(0.25)
    c_app = jit(0.01)

    # short period: alpha' and q'
    A0[ial, ial], A0[ial, iq], A0[ial, il], A0[ial, 0] = Z_a, 1.0, Z_l, Z_d
    A0[iq, ial], A0[iq, iq], A0[iq, il], A0[iq, 0] = M_a, M_q, M_l, M_d
    A0[iq, ic[0]] = M_nose * gv
    A2[iq, ic[0]] = M_a * gv  # tail patch
    A2[ial, ic[0]] = 0.3 * Z_a * gv

    # wing lift with aerodynamic lag, gust at tau1 with an apparent-mass term
    A0[il, il] = -1 / T_l
    A0[il, ial] = 1 / T_l
    A0[il, 1], A0[il, 2] = k_in / T_l, k_out / T_l
    A1[il, ic[0]] = gv / T_l
    A1[il, ic[1]] = c_app * gv / T_l

    # wing bending modes driven by lift and the aileron inertia
    wk = np.sort(np.exp(rng.uniform(*np.log(cfg.freq_range), nm)))
    zk = rng.uniform(*cfg.damping, nm)
    f_l = rng.uniform(0.5, 1.5, nm) * wk ** 0.5
    f_a = rng.normal(0.0, 0.3, (nm, 2)) * wk[:, None] ** 0.5
    for k in range(nm):
        A0[ie[k], ied[k]] = 1.0
        A0[ied[k], ie[k]] = -wk[k] ** 2
        A0[ied[k], ied[k]] = -2 * zk[k] * wk[k]
        A0[ied[k], il] = f_l[k]
        A0[ied[k], 1:3] = f_a[k]

    # gust chain: 0 = -g0 + w, g0' = g1, g1' = g2
    A0[ic[0], ic[0]] = -1.0
    B[ic[0], GUST] = 1.0
    E[ic[1], ic[0]] = 1.0
    A0[ic[1], ic[1]] = 1.0
    E[ic[2], ic[1]] = 1.0
    A0[ic[2], ic[2]] = 1.0

    C0 = np.zeros((1 + N_Z, n))
    C1 = np.zeros((1 + N_Z, n))
    # nose vane sees the local gust and the fuselage bending rate
    C1[0, ial] = 1.0
    C1[0, ic[0]] = gv
    C1[0, ied] = rng.normal(0.0, 0.002, nm)
    # load factor (per unit lift)
    nz_row = np.zeros(n)
    nz_row[il], nz_row[ial], nz_row[0] = Z_l, Z_a, Z_d
    nz_row *= -cfg.V / G0
    C0[1] = nz_row
    # station bending: outboard lift share, aileron arms, modal curvature, inertia relief
    b = cfg.semi_span
    y_in, y_out = 0.55 * b, 0.8 * b
    for i, x in enumerate(cfg.stations):
        r = 1 + 1 + i
        share = (1 - x / b) ** 2 * (b - x) / 3
        C0[r, il] = share
        C0[r, 1] = -k_in * share + k_in * max(y_in - x, 0.0) / b
        C0[r, 2] = -k_out * share + k_out * max(y_out - x, 0.0) / b
        psi = np.cos((np.arange(nm) + 1) * math.pi * x / (2 * b)) * (1 - x / b)
        C0[r, ie] = 0.05 * psi * wk ** 2 / f_l.mean()
        C0[r] -= 0.15 * share * nz_row / (cfg.V / G0)
    return DelayedDescriptorModel(E, A0, A1, A2, B, C0, C1, cfg.tau1, cfg.tau2, cfg.tau_m,
                                  tuple(int(i) for i in ic), GUST)


def demo_controller(gain: float = 1.2, washout: float = 4.0, zero: float = 6.0,
                    pole: float = 30.0, rolloff: float = 15.0) -> DescriptorModel:
    """Washout lead-lag from the nose vane to both ailerons, tail unused.

    ``K(s) = -gain * s/(s + washout) * (s/zero + 1)/(s/pole + 1) * F(s)``
    with ``F`` the 4th-order Butterworth low-pass at ``rolloff`` rad/s.
    The washout leaves the pilot's low-frequency response untouched.
    """
    from scipy.signal import tf2ss

    num = np.polymul([1.0, 0.0], [1 / zero, 1.0])
    den = np.polymul([1.0, washout], [1 / pole, 1.0])
    for zeta in (math.cos(math.pi / 8), math.cos(3 * math.pi / 8)):
        den = np.polymul(den, [1 / rolloff ** 2, 2 * zeta / rolloff, 1.0])
    A, Bv, C, D = tf2ss(-gain * num, den)
    route = np.array([[0.0], [1.0], [1.0]])
    return DescriptorModel.from_abcd(A, Bv, route @ C, route @ D)


@dataclass
class SimulationRecords:
    """Time records of one simulation: ``t`` (N,), ``y`` (N,1), ``u`` (N,3), ``z`` (N,6)."""

    t: np.ndarray
    y: np.ndarray
    u: np.ndarray
    z: np.ndarray

    def header(self):
        return (["t"] + [f"y_{i + 1}" for i in range(self.y.shape[1])]
                + [f"u_{i + 1}" for i in range(self.u.shape[1])]
                + [f"z_{i + 1}" for i in range(self.z.shape[1])])

    def to_csv(self, path) -> None:
        data = np.column_stack([self.t, self.y, self.u, self.z])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows([[repr(float(v)) for v in row] for row in data])

    @classmethod
    def from_csv(cls, path) -> "SimulationRecords":
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            head = next(r)
            data = np.array([[float(v) for v in row] for row in r]).reshape(-1, len(head))
        cols = lambda p: [i for i, hname in enumerate(head) if hname.startswith(p)]  # noqa: E731
        return cls(data[:, 0], data[:, cols("y_")], data[:, cols("u_")], data[:, cols("z_")])


def _steps(x, dt, what):
    k = x / dt
    kr = int(round(k))
    if abs(k - kr) > 1e-9 * max(1.0, k):
        raise IncompatibleRates(f"{what} = {x:g} is not a multiple of dt = {dt:g}")
    return kr


def _zero_signal(t):
    return 0.0, 0.0, 0.0


def _gust_fn(gust):
    if gust is None:
        return _zero_signal
    if isinstance(gust, GustProfile):
        return lambda t: gust_signal(gust, t) if t >= 0 else (0.0, 0.0, 0.0)
    return lambda t: gust(t) if t >= 0 else (0.0, 0.0, 0.0)


def _controller_matrices(K, h, ny, nu):
    if K is None:
        return None
    if K.dt is not None and abs(K.dt - h) > 1e-12 * h:
        raise IncompatibleRates(f"controller sampled at {K.dt:g}, loop runs at h = {h:g}")
    if (K.n_inputs, K.n_outputs) != (ny, nu):
        raise ValueError(f"controller must be {nu}x{ny}")
    sf = to_standard(K)
    if sf.poly:
        raise ValueError("controller has a polynomial part")
    return sf.A, sf.B, sf.C, sf.D


def simulate_closed_loop(plant: DelayedDescriptorModel, K_d, gust, pilot: Callable | None = None,
                         h: float = 0.04, t_end: float | None = None,
                         dt: float = 0.004) -> SimulationRecords:
    """Fixed-step RK4 simulation of the loop plant / controller.

    A discrete ``K_d`` samples ``y`` at ``k h`` and its output is held over
    ``[k h, (k+1) h)``.  A continuous ``K_d`` is integrated together with
    the plant (the continuous-equivalent loop; ``h`` is then only checked
    against ``dt``).  ``K_d=None`` gives the open loop.

    Delays are rounded to the nearest multiple of ``dt``.  Delayed states at
    RK4 half steps use the exact gust for chain states and cubic Hermite
    interpolation of the history for the others.  ``gust`` is a
    :class:`GustProfile`, ``None`` or a callable returning ``(w, dw, ddw)``.
    """
    if not dt > 0 or not h > 0:
        raise IncompatibleRates("h and dt must be positive")
    if h / dt < 5 - 1e-9:
        raise IncompatibleRates(f"dt = {dt:g} exceeds h/5")
    per = _steps(h, dt, "h")
    if t_end is None:
        t_end = (gust.duration if isinstance(gust, GustProfile) else 0.0) + 3.0
    if isinstance(gust, GustProfile) and t_end < gust.duration:
        raise IncompatibleRates("t_end shorter than the gust")
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    n = plant.order
    chain = list(plant.derivative_chain)
    rest = [i for i in range(n) if i not in chain]
    nr = len(rest)
    if chain and np.any(plant.E[np.ix_(rest, chain)] != 0):
        raise ValueError("chain derivatives may not appear in the dynamic rows")
    Ei = np.linalg.inv(plant.E[np.ix_(rest, rest)])
    A0r, A1r, A2r, Br = (Ei @ M[rest] for M in (plant.A0, plant.A1, plant.A2, plant.B))
    ny, nu = N_Y, plant.n_inputs - 2
    Kmat = _controller_matrices(K_d, h, ny, nu)
    continuous = Kmat is not None and K_d.dt is None
    nk = Kmat[0].shape[0] if Kmat else 0
    d1, d2, dm = (int(round(tau / dt)) for tau in (plant.tau1, plant.tau2, plant.tau_m))
    gfn = _gust_fn(gust)
    pfn = pilot if pilot is not None else (lambda t: 0.0)
    gust_col = plant.chain_input if plant.chain_input is not None else GUST
    use1, use2 = bool(np.any(A1r)), bool(np.any(A2r))

    size = max(d1, d2, dm) + 2
    hist = np.zeros((size, n))
    dhist = np.zeros((size, nr))
    C0, C1 = plant.C0, plant.C1
    u_in = np.zeros(plant.n_inputs)

    def full_state(xr, t):
        x = np.empty(n)
        x[rest] = xr
        if chain:
            x[chain] = gfn(t)
        return x

    def delayed(k_now, d, half, t, x_now):
        # state at t - d dt, t = (k_now + half/2) dt
        if d == 0:
            return x_now
        k = k_now - d
        if k < 0:
            return np.zeros(n)
        if not half:
            return hist[k % size]
        x0, x1 = hist[k % size], hist[(k + 1) % size]
        out = np.empty(n)
        out[rest] = 0.5 * (x0[rest] + x1[rest]) + dt * (dhist[k % size] - dhist[(k + 1) % size]) / 8
        if chain:
            out[chain] = gfn(t - d * dt)
        return out

    def rhs(z, t, k_now, half, u_hold):
        xr = z[:nr]
        x = full_state(xr, t)
        if continuous:
            Ak, Bk, Ck, Dk = Kmat
            xi = z[nr:]
            yv = C0[:ny] @ x + C1[:ny] @ delayed(k_now, dm, half, t, x)
            u_hold = Ck @ xi + Dk @ yv
        u_in[PILOT] = pfn(t)
        u_in[gust_col] = gfn(t)[0]
        u_in[2:] = u_hold
        dx = A0r @ x + Br @ u_in
        if use1:
            dx += A1r @ delayed(k_now, d1, half, t, x)
        if use2:
            dx += A2r @ delayed(k_now, d2, half, t, x)
        if continuous:
            return np.concatenate([dx, Ak @ xi + Bk @ yv])
        return dx

    t_rec = np.arange(n_steps + 1) * dt
    Y = np.zeros((n_steps + 1, ny))
    U = np.zeros((n_steps + 1, nu))
    Zr = np.zeros((n_steps + 1, plant.n_outputs - ny))
    z = np.zeros(nr + (nk if continuous else 0))
    xi = np.zeros(nk)
    u_hold = np.zeros(nu)
    for k in range(n_steps + 1):
        t = k * dt
        x = full_state(z[:nr], t)
        hist[k % size] = x
        out = C0 @ x + C1 @ delayed(k, dm, False, t, x)
        if continuous:
            u_hold = Kmat[2] @ z[nr:] + Kmat[3] @ out[:ny]
        elif Kmat is not None and k % per == 0:
            Ak, Bk, Ck, Dk = Kmat
            yk = out[:ny]
            u_hold = Ck @ xi + Dk @ yk
            xi = Ak @ xi + Bk @ yk
        Y[k], Zr[k], U[k] = out[:ny], out[ny:], u_hold
        if k == n_steps:
            break
        k1 = rhs(z, t, k, False, u_hold)
        dhist[k % size] = k1[:nr]
        k2 = rhs(z + 0.5 * dt * k1, t + 0.5 * dt, k, True, u_hold)
        k3 = rhs(z + 0.5 * dt * k2, t + 0.5 * dt, k, True, u_hold)
        k4 = rhs(z + dt * k3, t + dt, k + 1, False, u_hold)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > 1e9:
            raise UnstableSimulation(f"state norm exceeded 1e9 at t = {t + dt:.4g} s")
    return SimulationRecords(t_rec, Y, U, Zr)


def peak_loads(rec: SimulationRecords, cfg: EnvelopeConfig) -> np.ndarray:
    """Max over time of ``|load|`` per station."""
    return np.array([np.max(np.abs(rec.z[:, cfg.load_output_indices[x]])) for x in cfg.stations])


@dataclass(frozen=True)
class StationGain:
    """Attenuation at one station: largest and smallest over the gust set."""

    x: float
    gain: float
    min_gain: float


def envelope_stats(open_records: Sequence[SimulationRecords],
                   closed_records: Sequence[SimulationRecords],
                   cfg: EnvelopeConfig = EnvelopeConfig()) -> list:
    """Per station ``(peak_open - peak_closed) / peak_open``, max and min over gusts."""
    if len(open_records) != len(closed_records) or not open_records:
        raise ValueError("open and closed record sets must be nonempty and paired")
    ratios = []
    for ro, rc in zip(open_records, closed_records):
        if ro.t.shape != rc.t.shape or np.any(ro.t != rc.t):
            raise ValueError("open and closed records use different time grids")
        po, pc = peak_loads(ro, cfg), peak_loads(rc, cfg)
        if np.any(po < 1e-12):
            raise ZeroBaselinePeak("baseline peak load vanishes at a station")
        ratios.append((po - pc) / po)
    R = np.array(ratios)
    return [StationGain(x, float(R[:, i].max()), float(R[:, i].min()))
            for i, x in enumerate(cfg.stations)]


def envelope_gain(open_records, closed_records, cfg: EnvelopeConfig = EnvelopeConfig()):
    """``[(x_i, E(x_i))]`` with ``E`` the largest relative peak-load reduction over the gusts."""
    return [(g.x, g.gain) for g in envelope_stats(open_records, closed_records, cfg)]


def write_envelope_csv(path, stats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "E", "E_min"])
        for g in stats:
            w.writerow([repr(g.x), repr(g.gain), repr(g.min_gain)])


def simulate_gust_set(plant, K_d, gusts, h, dt, pilot=None, settle: float = 3.0,
                      max_workers: int | None = None) -> list:
    """One record per gust, in gust order.  ``max_workers > 1`` uses a thread pool."""
    from concurrent.futures import ThreadPoolExecutor

    def one(p):
        return simulate_closed_loop(plant, K_d, p, pilot, h, p.duration + settle, dt)

    profiles = list(gusts)
    if not max_workers or max_workers <= 1 or len(profiles) == 1:
        return [one(p) for p in profiles]
    with ThreadPoolExecutor(max_workers=max_workers) as ex:
        return list(ex.map(one, profiles))


def pilot_step(amplitude: float = 0.01, t0: float = 0.0):
    """Tail command step of ``amplitude`` rad at ``t0``."""
    return lambda t: amplitude if t >= t0 else 0.0


def handling_quality_gap(open_rec: SimulationRecords, closed_rec: SimulationRecords,
                         cutoff: float = 1.0) -> float:
    """Relative low-frequency deviation of the load factor responses.

    Both ``n_z`` traces pass through the first-order low-pass
    ``cutoff/(s + cutoff)``; the result is ``max|diff| / max|open|``.
    """
    from scipy.signal import lfilter

    dt = float(open_rec.t[1] - open_rec.t[0])
    a = math.exp(-cutoff * dt)
    f = lambda v: lfilter([1 - a], [1, -a], v)  # noqa: E731
    no, nc = f(open_rec.z[:, 0]), f(closed_rec.z[:, 0])
    ref = np.max(np.abs(no))
    if ref < 1e-12:
        raise ZeroBaselinePeak("open-loop load factor response vanishes")
    return float(np.max(np.abs(no - nc)) / ref)


def envelope_benchmark(plant, K: DescriptorModel, gusts: GustSet, h: float, dt: float,
                       n_bar: int = 6, env: EnvelopeConfig = EnvelopeConfig(),
                       max_workers: int | None = None) -> dict:
    """Envelope gains of the continuous loop and of the Loewner and Tustin discretisations.

    Returns ``{"continuous": stats, "loewner": stats, "tustin": stats,
    "loewner_report": DiscretizationReport}`` with ``stats`` from
    :func:`envelope_stats`.  All loops share the integration step ``dt``.
    """
    from .discretize import SamplingConfig, loewner_discretize, tustin

    Kl, rep = loewner_discretize(K, SamplingConfig(h, 200, n_bar))
    base = simulate_gust_set(plant, None, gusts, h, dt, max_workers=max_workers)
    out = {"loewner_report": rep}
    for name, Kd in (("continuous", K), ("loewner", Kl), ("tustin", tustin(K, h))):
        recs = simulate_gust_set(plant, Kd, gusts, h, dt, max_workers=max_workers)
        out[name] = envelope_stats(base, recs, env)
    return out


def ordering_count(bench: dict) -> int:
    """Stations where continuous >= loewner >= tustin attenuation."""
    c, lw, t = (np.array([g.gain for g in bench[k]]) for k in ("continuous", "loewner", "tustin"))
    return int(np.sum((c >= lw) & (lw >= t)))
