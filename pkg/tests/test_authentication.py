"""Residual test statistic and its distributions under both hypotheses."""

import math

import numpy as np
import pytest

from uwauth import test_statistic as statistic
from uwauth import test_statistic_pinv as statistic_pinv
from uwauth import (
    AnchorArray,
    ChannelParams,
    DecisionConfig,
    DomainError,
    Hypothesis,
    NoisySquaredDistances,
    Scenario,
    calibrate_threshold,
    decide,
    distance_noise_variance,
    empirical_rates,
    h0_distribution,
    h1_distribution,
    p_fa_analytic,
    p_md_analytic,
    residual_vector,
    simulate_test_statistics,
)

TRIANGLE = AnchorArray(np.array([[0.0, 500.0], [-500.0, -500.0], [-500.0, 500.0]]))


def make_scenario(power_db=50.0, gain=1.0, eve=(100.0, 100.0)):
    channel = ChannelParams(transmit_power_db=power_db, signal_design_gain=gain)
    return Scenario(TRIANGLE, alice=(0.0, 0.0), eve=eve, channel=channel)


def obs_from_squared(values):
    v = np.asarray(values, dtype=float)
    return NoisySquaredDistances(np.sqrt(np.abs(v)), np.zeros_like(v), v)


def test_residual_identity_random_geometry():
    # r_i = 2 d_i n_i + (d_i^2 - d_claim_i^2) whenever the observations
    # follow the linearized model, independent of who transmits.
    rng = np.random.default_rng(8)
    for _ in range(300):
        anchors = AnchorArray(rng.uniform(-500.0, 500.0, (rng.integers(3, 7), 2)))
        src = rng.uniform(-400.0, 400.0, 2)
        claim = rng.uniform(-400.0, 400.0, 2)
        d = anchors.distances_to(src)
        dc = anchors.distances_to(claim)
        noise = rng.normal(0.0, 5.0, d.shape)
        obs = obs_from_squared(d * d + 2.0 * noise * d)
        r = residual_vector(obs, anchors, claim)
        expected = 2.0 * d * noise + (d * d - dc * dc)
        np.testing.assert_allclose(r, expected, rtol=1e-9, atol=1e-6)


def test_statistic_known_noise_pattern():
    # Claim equals the true position, so the residual is pure noise:
    # r = 2 * d * n with d = (500, 500*sqrt(2), 500*sqrt(2)).
    d = TRIANGLE.distances_to((0.0, 0.0))
    noise = np.array([1.0, -2.0, 0.5])
    obs = obs_from_squared(d * d + 2.0 * noise * d)
    r = residual_vector(obs, TRIANGLE, (0.0, 0.0))
    np.testing.assert_allclose(
        r, [1000.0, -2828.42712474619, 707.1067811865476], rtol=1e-12)
    assert statistic(r) == pytest.approx(9.5e6, rel=1e-12)


def test_statistic_noiseless_impersonation():
    # An impersonator at (100, 100) claiming the origin leaves squared
    # distance gaps (-80000, 220000, 20000) against these anchors.
    scen = make_scenario()
    d_eve = scen.eve_distances()
    obs = obs_from_squared(d_eve ** 2)
    r = residual_vector(obs, TRIANGLE, scen.alice)
    np.testing.assert_allclose(r, [-80000.0, 220000.0, 20000.0],
                               rtol=0, atol=1e-6)
    assert statistic(r) == pytest.approx(5.52e10, rel=1e-9)


def test_legitimate_distribution_terms():
    # Scales are 2 * d_i * sigma_i at the claimed position, offsets zero.
    scen = make_scenario(power_db=50.0, gain=1.0e6)
    dist = h0_distribution(scen)
    d = scen.alice_distances()
    sigma = np.sqrt(distance_noise_variance(d, scen.channel))
    np.testing.assert_allclose(dist.scales, 2.0 * d * sigma, rtol=1e-12)
    np.testing.assert_allclose(
        dist.scales,
        [268.51250432492185, 506.5914536130651, 506.5914536130651],
        rtol=1e-12)
    np.testing.assert_array_equal(dist.offsets, np.zeros(3))
    assert dist.mean() == pytest.approx(585368.7667264377, rel=1e-12)


def test_impersonator_distribution_terms():
    scen = make_scenario(power_db=50.0, gain=1.0e6)
    dist = h1_distribution(scen)
    d_eve = scen.eve_distances()
    sigma = np.sqrt(distance_noise_variance(d_eve, scen.channel))
    np.testing.assert_allclose(dist.scales, 2.0 * d_eve * sigma, rtol=1e-12)
    np.testing.assert_allclose(
        dist.offsets, [-80000.0, 220000.0, 20000.0], rtol=0, atol=1e-6)
    scen_no_eve = Scenario(TRIANGLE, alice=(0.0, 0.0), eve=None,
                           channel=scen.channel)
    with pytest.raises(DomainError, match="no eve position"):
        h1_distribution(scen_no_eve)


def test_decide_tie_goes_to_legitimate():
    cfg = DecisionConfig(10.0)
    assert decide(10.0, cfg) is Hypothesis.H0_NO_IMPERSONATION
    assert decide(9.999, cfg) is Hypothesis.H0_NO_IMPERSONATION
    assert decide(10.001, cfg) is Hypothesis.H1_IMPERSONATION
    with pytest.raises(DomainError, match="finite and nonnegative"):
        DecisionConfig(-1.0)
    with pytest.raises(DomainError, match="finite and nonnegative"):
        DecisionConfig(float("nan"))


def test_calibration_round_trip():
    scen = make_scenario(gain=1.0e6)
    for target in (0.5, 0.1, 0.01, 1e-4):
        cfg = calibrate_threshold(scen, target)
        assert p_fa_analytic(scen, cfg) == pytest.approx(target, abs=2e-6)
    with pytest.raises(DomainError):
        calibrate_threshold(scen, 0.0)
    with pytest.raises(DomainError):
        calibrate_threshold(scen, 1.0)


def test_false_alarm_and_miss_move_oppositely_in_threshold():
    scen = make_scenario(power_db=20.0, gain=1.0e6)
    cfgs = [calibrate_threshold(scen, t) for t in (0.5, 0.1, 0.01)]
    fas = [p_fa_analytic(scen, c) for c in cfgs]
    mds = [p_md_analytic(scen, c) for c in cfgs]
    assert fas[0] > fas[1] > fas[2]
    assert mds[0] <= mds[1] <= mds[2]


def test_simulated_statistics_match_analytic_distributions():
    scen = make_scenario(power_db=55.0, gain=1.0)
    ts0, ts1 = simulate_test_statistics(scen, 60_000, 314)
    assert ts0.shape == ts1.shape == (60_000,)
    h0 = h0_distribution(scen)
    h1 = h1_distribution(scen)
    for dist, ts in ((h0, ts0), (h1, ts1)):
        qs = np.quantile(ts, [0.1, 0.5, 0.9])
        for q, level in zip(qs, (0.1, 0.5, 0.9)):
            emp = float((ts <= q).mean())
            se = math.sqrt(level * (1 - level) / ts.size)
            assert abs(dist.cdf(float(q)) - emp) <= 4.0 * se + 1e-4


def test_simulation_is_reproducible_and_worker_invariant():
    scen = make_scenario()
    a0, a1 = simulate_test_statistics(scen, 9000, (1, 2))
    b0, b1 = simulate_test_statistics(scen, 9000, (1, 2))
    c0, c1 = simulate_test_statistics(scen, 9000, (1, 2), workers=5)
    np.testing.assert_array_equal(a0, b0)
    np.testing.assert_array_equal(a1, b1)
    np.testing.assert_array_equal(a0, c0)
    np.testing.assert_array_equal(a1, c1)
    d0, _ = simulate_test_statistics(scen, 9000, (1, 3))
    assert not np.array_equal(a0, d0)


def test_simulation_argument_validation():
    scen = make_scenario()
    with pytest.raises(DomainError):
        simulate_test_statistics(scen, 0, 1)
    with pytest.raises(DomainError, match="eve_mode"):
        simulate_test_statistics(scen, 10, 1, eve_mode="nope")
    scen_no_eve = Scenario(TRIANGLE, alice=(0.0, 0.0), eve=None,
                           channel=ChannelParams())
    with pytest.raises(DomainError):
        simulate_test_statistics(scen_no_eve, 10, 1, eve_mode="fixed")
    # uniform mode draws impersonator positions, so no fixed eve needed
    u0, u1 = simulate_test_statistics(scen_no_eve, 64, 5, eve_mode="uniform")
    assert u1.shape == (64,)


def test_empirical_rates_against_analytic():
    scen = make_scenario(power_db=60.0, gain=1.0)
    cfg = calibrate_threshold(scen, 0.2)
    rates = empirical_rates(scen, cfg, 40_000, 77)
    assert rates.method == "empirical"
    assert rates.trials == 40_000
    assert abs(rates.p_fa - 0.2) <= 3.0 * rates.stderr_fa + 1e-3
    md = p_md_analytic(scen, cfg)
    assert abs(rates.p_md - md) <= 3.0 * rates.stderr_md + 1e-3
    assert rates.stderr_fa == pytest.approx(
        math.sqrt(rates.p_fa * (1 - rates.p_fa) / rates.trials), rel=1e-9)


def test_position_space_statistic_never_exceeds_residual_norm():
    rng = np.random.default_rng(21)
    for _ in range(50):
        anchors = AnchorArray(rng.uniform(-500.0, 500.0, (5, 2)))
        src = rng.uniform(-300.0, 300.0, 2)
        claim = rng.uniform(-300.0, 300.0, 2)
        d = anchors.distances_to(src)
        obs = obs_from_squared(d * d + 2.0 * rng.normal(0, 3.0, 5) * d)
        ts = statistic(residual_vector(obs, anchors, claim))
        ts_p = statistic_pinv(obs, anchors, claim)
        assert ts_p <= ts * (1.0 + 1e-9) + 1e-9


def test_position_space_statistic_equality_in_row_space():
    # With three anchors the truncated estimator annihilates exactly the
    # all-ones direction; any residual orthogonal to it is reproduced.
    rng = np.random.default_rng(22)
    A = TRIANGLE.design_matrix()
    anchor_sq = (TRIANGLE.xy ** 2).sum(axis=1)
    ones = np.ones(3) / math.sqrt(3.0)
    for _ in range(25):
        claim = rng.uniform(-300.0, 300.0, 2)
        r = rng.normal(0.0, 1000.0, 3)
        r -= (r @ ones) * ones
        lift = np.array([claim[0], claim[1], claim @ claim])
        obs = obs_from_squared(A @ lift + anchor_sq + r)
        ts = statistic(residual_vector(obs, TRIANGLE, claim))
        ts_p = statistic_pinv(obs, TRIANGLE, claim)
        assert ts_p == pytest.approx(ts, rel=1e-8, abs=1e-8)
