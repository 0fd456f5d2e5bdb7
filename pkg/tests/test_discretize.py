import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from generators import SUITE_SEEDS, UNIT_BANDWIDTH, bandwidth, controller_suite, tf
from lmor.errors import InvalidOrderBound, NonConvergenceWarning, PoleAtMapSingularity
from lmor.lti import DescriptorModel, eval_transfer, frequency_response, is_stable, random_stable_model
from lmor.loewner import interpolation_residuals
from lmor.discretize import (
    SamplingConfig,
    backward,
    build_discretization_dataset,
    disc_error_einf,
    holder_response,
    loewner_discretize,
    sampler_alias_sum,
    tustin,
)

LAG = tf([1.0], [1.0, 1.0])
LEAD_LAG = tf([1.0, 1.0], [1.0, 10.0])  # (s + 1)/(s + 10)


def peak_gain(K, h, num=1000):
    w = np.linspace(0.0, math.pi / h, num)
    return np.max(np.abs(frequency_response(K, w)))


# --- holder and aliasing -------------------------------------------------------------------

def test_holder_examples():
    h = 0.1
    assert holder_response(0.0, h) == 1.0
    assert abs(holder_response(2 * math.pi / h, h)) <= 1e-15
    assert holder_response(math.pi / h, h) == pytest.approx(-2j / math.pi, abs=1e-15)
    assert holder_response(1e-9, h) == pytest.approx(1.0 - 0.5e-10j, abs=1e-18)


def test_alias_sum_examples():
    h = 0.5
    val, tail = sampler_alias_sum(lambda s: 1.0, 0.3, h, 2)
    assert val == pytest.approx(5 / h) and tail == pytest.approx(2 / h)
    val, tail = sampler_alias_sum(lambda s: 1 / (s + 1), 0.3, h, 0)
    assert val == pytest.approx(1 / (0.3j + 1) / h) and tail == pytest.approx(abs(val))
    with pytest.raises(ValueError):
        sampler_alias_sum(lambda s: 1.0, 0.3, h, -1)


def test_sampling_config_rules():
    cfg = SamplingConfig(0.1, 10, 4)
    w = cfg.grid()
    assert w.size == 10 and 0 < w[0] and w[-1] < cfg.omega_N
    assert cfg.omega_s == pytest.approx(2 * cfg.omega_N)
    with pytest.raises(InvalidOrderBound):
        SamplingConfig(0.1, 10, 0)
    with pytest.raises(InvalidOrderBound):
        SamplingConfig(0.1, 4, 6)
    with pytest.raises(ValueError):
        SamplingConfig(0.1, 9, 4)


def test_dataset_on_unit_circle_and_holder_growth():
    c, h = 2.0, 0.2
    cfg = SamplingConfig(h, 40, 4)
    data = build_discretization_dataset(DescriptorModel.static_gain([[c]]), cfg)
    np.testing.assert_allclose(np.abs(data.points), 1.0, rtol=1e-15)
    assert data.is_conjugate_closed()
    mags = np.abs(np.concatenate([data.vh[:, 0], data.w[:, 0]]))
    ang = np.abs(np.angle(data.points))
    order = np.argsort(ang)
    assert np.all(np.diff(mags[order]) >= -1e-12)
    assert mags.min() >= c and mags.max() <= c * math.pi / 2
    assert mags.max() == pytest.approx(c / abs(holder_response(cfg.grid()[-1], h)), rel=1e-14)


# --- classical maps ------------------------------------------------------------------------------

def test_tustin_and_backward_of_lag():
    h = 0.1
    for z in (0.5j, 0.9 + 0.1j):
        s_t = (2 / h) * (z - 1) / (z + 1)
        s_b = (z - 1) / (z * h)
        assert eval_transfer(tustin(LAG, h), z)[0, 0] == pytest.approx(1 / (s_t + 1), rel=1e-12)
        assert eval_transfer(backward(LAG, h), z)[0, 0] == pytest.approx(1 / (s_b + 1), rel=1e-12)
    assert is_stable(tustin(LAG, h)) and is_stable(backward(LAG, h))


def test_map_singularities():
    h = 0.1
    with pytest.raises(PoleAtMapSingularity):
        tustin(DescriptorModel.from_abcd([[2 / h]], [[1.0]], [[1.0]]), h)
    with pytest.raises(PoleAtMapSingularity):
        backward(DescriptorModel.from_abcd([[1 / h]], [[1.0]], [[1.0]]), h)


def test_einf_matches_direct_oracle(rng):
    h = 0.2
    K = random_stable_model(rng, 3, pole_range=(0.5, 5))
    Kd = tustin(K, h)
    w = (math.pi / h) * np.arange(1, 1001) / 1001
    assert disc_error_einf(K, Kd, h) == pytest.approx(oracles.sampled_error(K, Kd, h, w), rel=1e-12)
    with pytest.raises(ValueError):
        disc_error_einf(K, Kd, h, grid_size=50)


def test_einf_zero_for_holder_composite():
    # K(iw) = R(iw) G(e^{iwh}) is reproduced exactly by Kd = G
    h = 0.2
    G = random_stable_model(np.random.default_rng(4), 4, dt=h, pole_range=(0.3, 8))
    K = lambda s: holder_response(complex(s).imag, h) * eval_transfer(G, np.exp(s * h))  # noqa: E731
    assert disc_error_einf(K, G, h) <= 1e-13


# --- loewner discretization ------------------------------------------------------------------------

def test_lag_small_step():
    for h, tol in ((0.01, 1e-4), (1e-3, 1e-6)):
        Kd, rep = loewner_discretize(LAG, SamplingConfig(h, 200, 6))
        assert is_stable(Kd)
        assert rep.e_inf <= tol * peak_gain(LAG, h)


def test_agrees_with_tustin_below_tenth_nyquist():
    h = 1e-3
    Kd, _ = loewner_discretize(LAG, SamplingConfig(h, 200, 6))
    w = np.linspace(0.01, math.pi / h / 10, 400)
    diff = np.abs(frequency_response(Kd, w) - frequency_response(tustin(LAG, h), w))
    assert diff.max() <= 1e-3


def test_tustin_gap_is_holder_lead_at_coarser_step():
    # gap = K (1/R - 1) + (K - Kt) + (Kd - K/R); the first term, about K i w h / 2, dominates
    h = 0.01
    Kd, _ = loewner_discretize(LAG, SamplingConfig(h, 200, 6))
    w = np.linspace(0.01, math.pi / h / 10, 400)
    Kt = frequency_response(tustin(LAG, h), w)
    gap = frequency_response(Kd, w) - Kt
    K = frequency_response(LAG, w)
    lead = K * (1 / holder_response(w, h)[:, None, None] - 1)
    assert np.max(np.abs(gap)) > 1e-3
    assert np.max(np.abs(lead)) == pytest.approx(h / 2, rel=1e-2)
    assert np.max(np.abs(gap - lead - (K - Kt))) <= 1e-5


def test_lead_lag_coarse_step_ordering():
    h = 0.5
    w = (math.pi / h) * np.arange(1, 1001) / 1001
    Kd, rep = loewner_discretize(LEAD_LAG, SamplingConfig(h, 200, 6))
    e_b = oracles.sampled_error(LEAD_LAG, backward(LEAD_LAG, h), h, w)
    e_t = oracles.sampled_error(LEAD_LAG, tustin(LEAD_LAG, h), h, w)
    assert e_t == pytest.approx(1.1004, abs=1e-3)
    assert e_b == pytest.approx(0.7252, abs=1e-3)
    assert rep.e_inf < e_b < e_t


def test_exact_interpolation_when_no_reduction_needed():
    h = 0.2
    G = random_stable_model(np.random.default_rng(4), 4, dt=h, pole_range=(0.3, 8))
    K = lambda s: holder_response(complex(s).imag, h) * eval_transfer(G, np.exp(s * h))  # noqa: E731
    cfg = SamplingConfig(h, 40, 6)
    Kd, rep = loewner_discretize(K, cfg, scan=False)
    assert rep.n == rep.n_c == 4 and rep.stabilization_gap == 0.0
    l, r = interpolation_residuals(Kd, build_discretization_dataset(K, cfg))
    assert max(l.max(), r.max()) <= 1e-8
    assert rep.e_inf <= 1e-10


def test_report_round_trips_to_dict():
    _, rep = loewner_discretize(LAG, SamplingConfig(0.1, 40, 3))
    d = rep.to_dict()
    assert d["n_c"] == rep.n_c and d["e_inf"] == rep.e_inf and d["reducer"] == rep.reducer


def test_unknown_options():
    cfg = SamplingConfig(0.1, 40, 3)
    with pytest.raises(ValueError):
        loewner_discretize(LAG, cfg, reducer="bt")
    with pytest.raises(ValueError):
        loewner_discretize(LAG, cfg, stabilization="h2")


@pytest.mark.parametrize("h", sorted(SUITE_SEEDS))
def test_suite_beats_tustin(h):
    suite = controller_suite(h, np.random.default_rng(SUITE_SEEDS[h]))
    w = (math.pi / h) * np.arange(1, 1001) / 1001
    for K in suite[:4]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            Kd, rep = loewner_discretize(K, SamplingConfig(h, 200, 8))
        assert is_stable(Kd) and Kd.order <= 8
        assert rep.e_inf <= oracles.sampled_error(K, tustin(K, h), h, w)


# --- properties --------------------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), h=st.floats(0.02, 0.5), n_bar=st.integers(1, 6))
def test_output_stable_and_within_budget(seed, h, n_bar):
    K = random_stable_model(np.random.default_rng(seed), 4, pole_range=(0.2, 5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        Kd, rep = loewner_discretize(K, SamplingConfig(h, 100, n_bar))
    assert is_stable(Kd) and Kd.order <= n_bar and Kd.dt == h
    assert rep.e_inf == pytest.approx(disc_error_einf(K, Kd, h), rel=1e-12)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 31 - 1), h=st.floats(0.05, 0.5))
def test_error_non_increasing_in_budget(seed, h):
    K = random_stable_model(np.random.default_rng(seed), 5, pole_range=(0.2, 5))
    errs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        for n_bar in range(1, 6):
            errs.append(loewner_discretize(K, SamplingConfig(h, 100, n_bar))[1].e_inf)
    assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("num, den", UNIT_BANDWIDTH)
def test_unit_bandwidth_population(num, den):
    assert 0.5 <= bandwidth(num, den) <= 2.0
    assert len(num) < len(den)


@pytest.mark.parametrize("num, den", UNIT_BANDWIDTH)
def test_small_step_consistency(num, den):
    K = tf(num, den)
    h = 1e-3
    Kd, rep = loewner_discretize(K, SamplingConfig(h, 200, 6))
    assert rep.e_inf <= 1e-4 * peak_gain(K, h)
