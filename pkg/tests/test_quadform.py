"""Distribution of weighted noncentral chi-square sums.

Reference values come from routes the implementation does not take:
normal-cdf differences for one term, the library chi-square family for
equal weights, and plain Monte Carlo everywhere else.
"""

import math

import numpy as np
import pytest
from scipy.stats import chi2, ncx2, norm

from uwauth import AccuracyError, DomainError, QuadFormDist


def test_single_standard_term_matches_erf():
    d = QuadFormDist([1.0], [0.0])
    assert d.cdf(1.0) == pytest.approx(0.6826894921370859, abs=1e-12)
    assert d.sf(1.0) == pytest.approx(1.0 - 0.6826894921370859, abs=1e-12)


def test_single_offset_term_matches_normal_difference():
    # P((Z + 3)^2 <= x) = Phi(sqrt(x) - 3) - Phi(-sqrt(x) - 3)
    d = QuadFormDist([1.0], [3.0])
    for x in (1.0, 9.0, 25.0):
        expected = norm.cdf(math.sqrt(x) - 3.0) - norm.cdf(-math.sqrt(x) - 3.0)
        assert d.cdf(x) == pytest.approx(expected, abs=1e-10)


def test_two_equal_terms_form_exponential():
    d = QuadFormDist([1.0, 1.0], [0.0, 0.0])
    assert d.cdf(2.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-7)
    assert d.quantile(0.5) == pytest.approx(2.0 * math.log(2.0), abs=1e-5)


def test_equal_weights_match_library_chi_square():
    # Three and five unit terms exercise the inversion machinery against
    # a closed form it never consults.
    for n in (3, 5):
        d = QuadFormDist(np.ones(n), np.zeros(n))
        for q in (0.05, 0.3, 0.5, 0.8, 0.99):
            x = chi2.ppf(q, n)
            assert d.cdf(x) == pytest.approx(q, abs=1e-7)


def test_equal_weights_noncentral_match_library():
    offsets = np.array([1.0, -2.0, 0.5])
    lam = float(np.sum(offsets ** 2))
    d = QuadFormDist(np.ones(3), offsets)
    for x in (1.0, 4.0, 8.0, 15.0, 30.0):
        assert d.cdf(x) == pytest.approx(ncx2.cdf(x, 3, lam), abs=1e-7)


def test_scaled_pair_via_substitution():
    # c^2 * chi2_2 evaluated through the generic path.
    c = 7.5
    d = QuadFormDist([c, c], [0.0, 0.0])
    assert d.cdf(2.0 * c * c) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-7)


def test_moments():
    a = np.array([1.5, 0.3, 2.0])
    off = np.array([0.5, -1.0, 3.0])
    d = QuadFormDist(a, off)
    assert d.mean() == pytest.approx(float(np.sum(a**2 + off**2)), rel=1e-14)
    assert d.variance() == pytest.approx(
        float(np.sum(2 * a**4 + 4 * a**2 * off**2)), rel=1e-14)
    samples = d.sample(np.random.default_rng(5), 400_000)
    assert samples.mean() == pytest.approx(d.mean(), rel=0.01)
    assert samples.var() == pytest.approx(d.variance(), rel=0.03)


def test_scale_equivariance():
    rng = np.random.default_rng(17)
    a = rng.uniform(0.5, 3.0, 4)
    off = rng.normal(0.0, 2.0, 4)
    base = QuadFormDist(a, off)
    for c in (1e-3, 12.0, 1e5):
        scaled = QuadFormDist(c * a, c * off)
        for q in (0.1, 0.5, 0.9):
            x = base.mean() + (q - 0.5) * 2.0 * math.sqrt(base.variance())
            x = max(x, base.mean() * 0.05)
            assert scaled.cdf(c * c * x) == pytest.approx(base.cdf(x),
                                                          abs=2e-7)


def test_negligible_scale_folds_into_shift():
    plain = QuadFormDist([2.0], [1.0])
    folded = QuadFormDist([2.0, 1e-30], [1.0, 5.0])
    for x in (5.0, 30.0, 80.0):
        assert folded.cdf(x + 25.0) == pytest.approx(plain.cdf(x), abs=1e-9)
    assert folded.mean() == pytest.approx(plain.mean() + 25.0, rel=1e-14)


def test_monte_carlo_agreement_random_instances():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        a = 10.0 ** rng.uniform(-2.0, 2.0, n)
        off = rng.normal(0.0, 1.0, n) * a * rng.uniform(0.0, 4.0)
        d = QuadFormDist(a, off)
        samples = d.sample(np.random.default_rng(1234), 200_000)
        for q in (0.05, 0.5, 0.95):
            x = float(np.quantile(samples, q))
            emp = float((samples <= x).mean())
            se = math.sqrt(emp * (1.0 - emp) / samples.size)
            assert abs(d.cdf(x) - emp) <= 3.0 * se + 1e-4


def test_distribution_function_properties():
    d = QuadFormDist([3.0, 1.0, 0.2], [4.0, 0.0, -1.0])
    xs = np.linspace(0.0, d.mean() + 6 * math.sqrt(d.variance()), 60)
    ps = [d.cdf(float(x)) for x in xs]
    assert ps[0] == 0.0
    assert all(0.0 <= p <= 1.0 for p in ps)
    assert all(b >= a - 1e-9 for a, b in zip(ps, ps[1:]))
    for x in xs[::7]:
        assert d.cdf(float(x)) + d.sf(float(x)) == pytest.approx(1.0, abs=2e-7)


def test_kolmogorov_smirnov_against_sampler():
    # KS statistic evaluated on a 300-point grid of sample quantiles;
    # the supremum over this grid bounds the full statistic to within
    # the grid's empirical-cdf increments (~1/300).
    d = QuadFormDist([2.0, 1.0, 0.5], [1.0, -2.0, 0.0])
    samples = np.sort(d.sample(np.random.default_rng(99), 100_000))
    grid = samples[:: len(samples) // 300]
    emp = np.searchsorted(samples, grid, side="right") / samples.size
    model = np.array([d.cdf(float(x)) for x in grid])
    assert float(np.max(np.abs(model - emp))) < 0.006


def test_quantile_round_trip():
    d = QuadFormDist([1.0, 2.0], [0.5, -1.5])
    for p in (0.01, 0.25, 0.5, 0.9, 0.999):
        x = d.quantile(p)
        assert d.cdf(x) == pytest.approx(p, abs=1e-6)
    with pytest.raises(DomainError):
        d.quantile(0.0)
    with pytest.raises(DomainError):
        d.quantile(1.0)


def test_far_tails_saturate_exactly():
    d = QuadFormDist([10.0, 3.0], [100.0, -40.0])
    assert d.cdf(1e-3) == 0.0
    assert d.cdf(d.mean() * 1e4) == 1.0
    assert d.sf(d.mean() * 1e4) == 0.0
    assert d.cdf(-5.0) == 0.0
    assert d.cdf(0.0) == 0.0


def test_slow_phase_tail_regression():
    # Strongly offset terms whose partial sums once tricked the series
    # acceleration into a wildly wrong limit; the result must stay a
    # believable deep-tail probability and grow with the threshold.
    d = QuadFormDist([145149.1, 73468.9, 107628.8],
                     [199267.0, -286844.0, -175733.0])
    ps = [d.cdf(x) for x in (435537.6, 1266435.9, 2448335.5)]
    assert all(0.0 <= p < 1e-9 for p in ps)
    assert ps[0] < ps[1] < ps[2]
    # Independent ceiling: a one-term bound. Q >= (a_1 Z + delta_1)^2,
    # so cdf(x) can never exceed that single factor's cdf.
    single = QuadFormDist([145149.1], [199267.0])
    assert ps[2] <= single.cdf(2448335.5) + 1e-12


def test_near_deterministic_offsets():
    # Huge noncentrality: distribution is nearly Gaussian around its
    # mean; central probabilities must come out finite and ordered.
    a = np.array([1.0, 2.0])
    off = np.array([1500.0, -2200.0])
    d = QuadFormDist(a, off)
    m, s = d.mean(), math.sqrt(d.variance())
    ps = [d.cdf(m + z * s) for z in (-2.0, -0.5, 0.0, 0.5, 2.0)]
    assert all(b > a for a, b in zip(ps, ps[1:]))
    assert ps[2] == pytest.approx(0.5, abs=0.05)
    samples = d.sample(np.random.default_rng(31), 200_000)
    for z, p in zip((-2.0, 0.0, 2.0), (ps[0], ps[2], ps[4])):
        emp = float((samples <= m + z * s).mean())
        se = math.sqrt(max(emp * (1 - emp), 1e-9) / samples.size)
        assert abs(p - emp) <= 3.0 * se + 1e-4


def test_subnormal_threshold_is_zero_mass():
    d = QuadFormDist([3.0, 1.0], [0.5, 0.0])
    assert d.cdf(1e-300) == 0.0


def test_constructor_validation():
    with pytest.raises(DomainError, match="positive"):
        QuadFormDist([1.0, 0.0], [0.0, 0.0])
    with pytest.raises(DomainError, match="positive"):
        QuadFormDist([-1.0], [0.0])
    with pytest.raises(DomainError, match="equally long"):
        QuadFormDist([1.0, 2.0], [0.0])
    with pytest.raises(DomainError, match="finite"):
        QuadFormDist([np.inf], [0.0])
    with pytest.raises(DomainError, match="finite"):
        QuadFormDist([1.0], [np.nan])
    with pytest.raises(DomainError, match="finite"):
        QuadFormDist([1.0], [0.0]).cdf(np.inf)


def test_sampler_shapes():
    d = QuadFormDist([1.0, 2.0], [0.0, 1.0])
    assert isinstance(d.sample(np.random.default_rng(0)), float)
    assert d.sample(np.random.default_rng(0), 10).shape == (10,)
    assert len(d) == 2
