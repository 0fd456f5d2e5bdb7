import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from generators import LOEWNER_TOL, loewner_case, tf
from lmor.errors import (
    AmbiguousRank,
    CoincidentLeftRight,
    DuplicatePoints,
    InsufficientDataWarning,
    NotConjugateClosed,
)
from lmor.lti import (
    DelayedDescriptorModel,
    DescriptorModel,
    eval_many,
    eval_transfer,
    frequency_response,
    infinite_eigenvalue_count,
    poles,
    random_stable_model,
)
from lmor.loewner import (
    TangentialDataSet,
    build_pencil,
    compress,
    data_from_samples,
    interpolate,
    interpolation_residuals,
    mcmillan_degree,
    minimal_order,
    read_data_csv,
    sample_tangential,
    singular_values,
    split_points,
    write_data_csv,
)


def conj_points(w):
    w = np.asarray(w, float)
    return np.concatenate([1j * w, -1j * w])


# --- sampling ---------------------------------------------------------------------------

def test_sample_tangential_siso_split(lag):
    data = sample_tangential(lag, conj_points([1.0, 2.0]))
    assert data.m == 2
    np.testing.assert_allclose(np.abs(data.lh), 1.0)
    np.testing.assert_allclose(np.abs(data.r), 1.0)
    np.testing.assert_allclose(data.w[:, 0], eval_many(lag, data.lam)[:, 0, 0])


def test_sample_tangential_duplicates(lag):
    with pytest.raises(DuplicatePoints):
        sample_tangential(lag, [1j, 1j])


def test_sample_tangential_mimo_directions(rng):
    M = random_stable_model(rng, 4, 2, 2)
    data = sample_tangential(M, conj_points([0.5, 1.0, 2.0, 4.0]))
    assert data.vh.shape == (4, 2) and data.w.shape == (4, 2)
    for j in range(data.m):
        np.testing.assert_allclose(data.vh[j], data.lh[j] @ eval_transfer(M, data.mu[j]), rtol=1e-13)
        np.testing.assert_allclose(data.w[j], eval_transfer(M, data.lam[j]) @ data.r[j], rtol=1e-13)


def test_split_alternates_by_frequency():
    pts = conj_points([1.0, 2.0, 3.0, 4.0])
    left, right = split_points(pts)
    assert [abs(pts[g[0]].imag) for g in left] == [1.0, 3.0]
    assert [abs(pts[g[0]].imag) for g in right] == [2.0, 4.0]


def test_data_conjugate_closure(rng):
    M = random_stable_model(rng, 3)
    assert sample_tangential(M, conj_points([1.0, 2.0])).is_conjugate_closed()
    half = data_from_samples([1j, 2j], eval_many(M, [1j, 2j]))
    assert not half.is_conjugate_closed()
    with pytest.raises(NotConjugateClosed):
        compress(build_pencil(half), 1, real=True)


# --- pencil -------------------------------------------------------------------------------

def test_pencil_constant_function():
    c = 2.5
    data = data_from_samples(conj_points([1.0, 2.0]), np.full(4, c))
    P = build_pencil(data)
    np.testing.assert_allclose(P.LL, 0.0, atol=1e-15)
    np.testing.assert_allclose(P.sLL, c, rtol=1e-15)
    assert minimal_order(P, data, 1e-9) == 1 and mcmillan_degree(P) == 0


def test_pencil_hand_values():
    data = TangentialDataSet([1j], [[1.0]], [[1 / (1 + 1j)]], [-1j], [[1.0]], [[1 / (1 - 1j)]])
    P = build_pencil(data)
    assert P.LL[0, 0] == pytest.approx(-0.5, abs=1e-15)
    assert P.sLL[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_pencil_coincident_points():
    with pytest.raises(DuplicatePoints):
        TangentialDataSet([1j], [[1.0]], [[1.0]], [1j], [[1.0]], [[1.0]])


def test_pencil_sylvester_identities(rng):
    M = random_stable_model(rng, 5, 2, 2)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 8)))
    P = build_pencil(data)
    Mu, Lam = np.diag(data.mu), np.diag(data.lam)
    np.testing.assert_allclose(Mu @ P.LL - P.LL @ Lam, data.vh @ data.r.T - data.lh @ data.w.T,
                               atol=1e-12)
    np.testing.assert_allclose(Mu @ P.sLL - P.sLL @ Lam,
                               Mu @ data.vh @ data.r.T - data.lh @ data.w.T @ Lam, atol=1e-12)


def test_coincident_left_right_guard():
    # bypass the dataset check by building the pencil inputs directly
    data = TangentialDataSet([1j], [[1.0]], [[1.0]], [2j], [[1.0]], [[1.0]])
    object.__setattr__(data, "lam", np.array([1j]))
    with pytest.raises(CoincidentLeftRight):
        build_pencil(data)


# --- order detection and compression ---------------------------------------------------------

def test_minimal_order_third_order(rng):
    M = random_stable_model(rng, 3)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 10)))
    assert data.m == 10
    assert minimal_order(build_pencil(data), data, 1e-10) == 3


def test_minimal_order_zero_function():
    data = data_from_samples(conj_points([1.0, 2.0]), np.zeros(4))
    P = build_pencil(data)
    assert minimal_order(P, data) == 0
    assert compress(P, 0).order == 0


def test_minimal_order_tol_zero_on_noisy_data(rng):
    M = random_stable_model(rng, 3)
    pts = conj_points(np.logspace(-1, 1, 10))
    vals = eval_many(M, pts) + 1e-6 * rng.standard_normal((pts.size, 1, 1))
    data = data_from_samples(pts, vals)
    with pytest.raises(AmbiguousRank):
        minimal_order(build_pencil(data), data, 0.0)


def test_compress_third_order_fresh_points(rng):
    M = random_stable_model(rng, 3)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 10)))
    Mh = compress(build_pencil(data), 3)
    assert Mh.is_real and Mh.order == 3
    fresh = np.concatenate([1j * rng.uniform(0.01, 100, 25), rng.uniform(-5, 5, 25) + 1j * rng.uniform(-5, 5, 25)])
    H, Hh = eval_many(M, fresh), eval_many(Mh, fresh)
    assert np.max(np.abs(H - Hh) / np.abs(H)) <= 1e-8


def test_compress_full_order_interpolates(rng):
    M = random_stable_model(rng, 4, 2, 2)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 6)))
    l, r = interpolation_residuals(compress(build_pencil(data), data.m), data)
    assert max(l.max(), r.max()) <= 1e-8


def test_compress_truncated_is_approximate(rng):
    M = random_stable_model(rng, 6)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 12)))
    l, r = interpolation_residuals(compress(build_pencil(data), 2), data)
    assert max(l.max(), r.max()) > 1e-6


def test_realification_preserves_response(rng):
    M = random_stable_model(rng, 5, 2, 2)
    data = sample_tangential(M, conj_points(np.logspace(-1, 1, 10)))
    P = build_pencil(data)
    Mc, Mr = compress(P, 5, real=False), compress(P, 5, real=True)
    assert Mr.is_real
    Hc, Hr = eval_many(Mc, data.points), eval_many(Mr, data.points)
    assert np.max(np.abs(Hc - Hr)) <= 1e-12 * np.max(np.abs(Hc))


# --- end-to-end interpolation -------------------------------------------------------------------

def test_interpolate_irrational_delayed_toy():
    M = DelayedDescriptorModel(None, [[-1.0, 1.0], [-4.0, -0.4]], [[0.0, 0.0], [-2.0, 0.0]], None,
                               [[0.0], [1.0]], [[1.0, 0.0]], None, tau1=0.1, tau2=0.1)
    w = np.logspace(-2, 3, 200)
    data = sample_tangential(M, conj_points(w))
    Mh = interpolate(data, 1e-14, strict=False)
    H, Hh = frequency_response(M, w)[:, 0, 0], frequency_response(Mh, w)[:, 0, 0]
    assert np.max(np.abs(H - Hh) / np.abs(H)) <= 1e-6


def test_interpolate_feedthrough_order():
    H = tf([1.0, 2.0], [1.0, 1.0])  # (s + 2)/(s + 1)
    data = sample_tangential(H, conj_points([0.3, 1.0, 3.0, 10.0]))
    P = build_pencil(data)
    assert mcmillan_degree(P) == 1
    Mh = interpolate(data)
    assert Mh.order == 2
    assert poles(Mh) == pytest.approx([-1.0])
    assert infinite_eigenvalue_count(Mh) == 1
    assert eval_transfer(Mh, 1e8)[0, 0] == pytest.approx(1.0, rel=1e-6)


def test_interpolate_underdetermined_warns():
    M = tf([1.0], [1.0, 0.5, 2.0])
    H1, H2 = eval_transfer(M, 1j), eval_transfer(M, 2j)
    data = TangentialDataSet([1j], [[1.0]], H1, [2j], [[1.0]], H2)
    with pytest.warns(InsufficientDataWarning):
        Mh = interpolate(data)
    l, r = interpolation_residuals(Mh, data)
    assert max(l.max(), r.max()) <= 1e-10


def test_data_csv_round_trip(tmp_path, rng):
    M = random_stable_model(rng, 3, 2, 1)
    data = sample_tangential(M, conj_points([0.5, 1.0, 2.0, 4.0]))
    write_data_csv(tmp_path / "d.csv", data)
    back = read_data_csv(tmp_path / "d.csv")
    for k in ("mu", "lh", "vh", "lam", "r", "w"):
        np.testing.assert_array_equal(getattr(back, k), getattr(data, k))
    write_data_csv(tmp_path / "e.csv", back)
    assert (tmp_path / "d.csv").read_bytes() == (tmp_path / "e.csv").read_bytes()


# --- properties -------------------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), trial=st.integers(0, 1))
def test_exact_interpolation_property(seed, trial):
    M, k, pts = loewner_case(np.random.default_rng(seed), trial)
    data = sample_tangential(M, pts)
    # identifiable in double precision: sigma_k clear of tol and a gap to sigma_{k+1}
    s = singular_values(build_pencil(data))[0]
    s = s / s[0]
    assume(s[k - 1] >= 10 * LOEWNER_TOL and s[k - 1] >= 1e3 * s[k])
    Mh = interpolate(data, LOEWNER_TOL)
    assert Mh.order >= k
    l, r = interpolation_residuals(Mh, data)
    assert max(l.max(), r.max()) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), order=st.integers(1, 15))
def test_rank_recovery_property(seed, order):
    rng = np.random.default_rng(seed)
    M = random_stable_model(rng, order, pole_range=(0.1, 10.0), damping=(0.02, 0.5))
    pts = conj_points(np.logspace(-1, 1, 4 * order))
    data = sample_tangential(M, pts)
    assert minimal_order(build_pencil(data), data, LOEWNER_TOL) == order


def test_zero_values_give_zero_model():
    data = data_from_samples(conj_points([1.0, 2.0, 3.0, 4.0]), np.zeros((8, 2, 2)))
    Mh = interpolate(data)
    assert Mh.order == 0
    assert isinstance(Mh, DescriptorModel)
