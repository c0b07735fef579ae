"""Hypothesis test for claimed transmitter positions.

The fusion center knows the legitimate node's claimed coordinates. For
each received packet it forms the lifted linear system from the squared
range observations and evaluates the squared residual against the claim,

    TS = || b - A chi(claim) ||^2,  chi(x, y) = (x, y, x^2 + y^2),

declaring impersonation when TS exceeds a threshold. Substituting the
observation model gives residual entries 2 d_i n_i + (d_i^2 - d_claim_i^2)
with d_i the actual transmitter-to-anchor distances, so TS is a weighted
noncentral chi-square sum under either hypothesis and both error rates
have exact expressions through QuadFormDist.

H0 throughout: the legitimate node transmitted. H1: an impersonator did.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import distance_noise_variance
from .errors import DomainError
from .localization import (
    AnchorArray,
    NoisySquaredDistances,
    Scenario,
    build_system,
    solve_position,
)
from .quadform import QuadFormDist

__all__ = [
    "Hypothesis",
    "DecisionConfig",
    "ErrorRates",
    "residual_vector",
    "test_statistic",
    "test_statistic_pinv",
    "decide",
    "h0_distribution",
    "h1_distribution",
    "p_fa_analytic",
    "p_md_analytic",
    "calibrate_threshold",
    "simulate_test_statistics",
    "empirical_rates",
]

# Trials are simulated in fixed-size blocks; block g draws its generator
# from (master_seed, g), so results never depend on worker scheduling.
_BLOCK = 4096


class Hypothesis(Enum):
    H0_NO_IMPERSONATION = 0
    H1_IMPERSONATION = 1


@dataclass(frozen=True)
class DecisionConfig:
    """Decision threshold for the residual test statistic."""

    threshold: float

    def __post_init__(self):
        if not (np.isfinite(self.threshold) and self.threshold >= 0):
            raise DomainError("threshold must be finite and nonnegative")


@dataclass(frozen=True)
class ErrorRates:
    """False-alarm and missed-detection probabilities.

    stderr fields hold binomial standard errors for empirical estimates
    and are 0 for analytic ones, as is the trial count.
    """

    p_fa: float
    p_md: float
    method: str
    stderr_fa: float = 0.0
    stderr_md: float = 0.0
    trials: int = 0


def residual_vector(observed: NoisySquaredDistances, anchors: AnchorArray,
                    claimed) -> np.ndarray:
    """Residual of the lifted system at the claimed position, shape (L,)."""
    A, b = build_system(anchors, observed.observed_sq_m2)
    return b - A @ _lift(claimed)


def test_statistic(residual) -> float:
    """Squared Euclidean norm of a residual vector."""
    r = np.asarray(residual, dtype=float)
    return float(r @ r)


def test_statistic_pinv(observed: NoisySquaredDistances, anchors: AnchorArray,
                        claimed) -> float:
    """Position-space variant of the statistic.

    Maps the gap between the least-squares position estimate and the
    claim back into observation space through the Moore-Penrose
    pseudoinverse of the truncated estimator matrix. Equals
    test_statistic exactly when the residual lies in the row space of
    that matrix and never exceeds it otherwise.
    """
    A, b = build_system(anchors, observed.observed_sq_m2)
    estimate = solve_position(A, b)[:2]
    estimator_rows = np.linalg.pinv(A)[:2]
    back = np.linalg.pinv(estimator_rows) @ (estimate - np.asarray(claimed, dtype=float))
    return float(back @ back)


def decide(ts: float, config: DecisionConfig) -> Hypothesis:
    """Threshold test; ties go to the legitimate hypothesis."""
    if ts > config.threshold:
        return Hypothesis.H1_IMPERSONATION
    return Hypothesis.H0_NO_IMPERSONATION


def h0_distribution(scenario: Scenario) -> QuadFormDist:
    """Exact TS distribution when the legitimate node transmits from its
    claimed position: every residual entry is pure noise."""
    d = scenario.alice_distances()
    sigma = np.sqrt(distance_noise_variance(d, scenario.channel))
    return QuadFormDist(2.0 * d * sigma, np.zeros_like(d))


def h1_distribution(scenario: Scenario) -> QuadFormDist:
    """Exact TS distribution when the impersonator transmits while
    claiming the legitimate position.

    Noise scales follow the impersonator's actual distances (that is the
    transmitter the channel acts on); offsets are the squared-distance
    gaps between impersonator and claim.
    """
    d_eve = scenario.eve_distances()
    d_alice = scenario.alice_distances()
    sigma = np.sqrt(distance_noise_variance(d_eve, scenario.channel))
    return QuadFormDist(2.0 * d_eve * sigma, d_eve ** 2 - d_alice ** 2)


def p_fa_analytic(scenario: Scenario, config: DecisionConfig) -> float:
    """False-alarm probability P(TS > threshold | H0)."""
    return h0_distribution(scenario).sf(config.threshold)


def p_md_analytic(scenario: Scenario, config: DecisionConfig) -> float:
    """Missed-detection probability P(TS <= threshold | H1)."""
    return h1_distribution(scenario).cdf(config.threshold)


def calibrate_threshold(scenario: Scenario, target_pfa: float) -> DecisionConfig:
    """Threshold whose analytic false-alarm rate equals target_pfa."""
    if not 0.0 < target_pfa < 1.0:
        raise DomainError("target false-alarm rate must lie in (0, 1)")
    return DecisionConfig(h0_distribution(scenario).quantile(1.0 - target_pfa))


def simulate_test_statistics(scenario: Scenario, trials: int, master_seed,
                             *, eve_mode: str = "fixed",
                             workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Simulate TS through the full pipeline under both hypotheses.

    Returns (ts_h0, ts_h1), each of shape (trials,). eve_mode 'fixed'
    transmits every H1 packet from scenario.eve; 'uniform' redraws the
    impersonator position uniformly over the deployment region per trial.
    Results are a pure function of (master_seed, trials): trials are
    processed in fixed blocks whose generators derive from the seed and
    the block index, so worker count and scheduling cannot change them.
    """
    if trials <= 0:
        raise DomainError("trials must be positive")
    if eve_mode not in ("fixed", "uniform"):
        raise DomainError("eve_mode must be 'fixed' or 'uniform'")
    if eve_mode == "fixed" and scenario.eve is None:
        raise DomainError("fixed eve_mode requires an eve position")

    seed = _seed_entropy(master_seed)
    anchors = scenario.anchors
    A = anchors.design_matrix()
    anchor_sq = (anchors.xy ** 2).sum(axis=1)
    model = A @ _lift(scenario.alice)

    d_alice = scenario.alice_distances()
    sig_alice = np.sqrt(distance_noise_variance(d_alice, scenario.channel))
    if eve_mode == "fixed":
        d_eve = scenario.eve_distances()
        sig_eve = np.sqrt(distance_noise_variance(d_eve, scenario.channel))

    width, height = scenario.region

    def run_block(g: int) -> tuple[int, np.ndarray, np.ndarray]:
        start = g * _BLOCK
        n = min(_BLOCK, trials - start)
        rng = np.random.default_rng(seed + (g,))
        z0 = rng.standard_normal((n, len(anchors)))
        obs0 = d_alice ** 2 + 2.0 * (z0 * sig_alice) * d_alice
        ts0 = _ts_rows(obs0, anchor_sq, model)
        if eve_mode == "fixed":
            de, se = d_eve, sig_eve
        else:
            eve = rng.uniform([-width / 2, -height / 2],
                              [width / 2, height / 2], size=(n, 2))
            de = np.hypot(eve[:, 0, None] - anchors.xy[:, 0],
                          eve[:, 1, None] - anchors.xy[:, 1])
            se = np.sqrt(distance_noise_variance(de, scenario.channel))
        z1 = rng.standard_normal((n, len(anchors)))
        obs1 = de ** 2 + 2.0 * (z1 * se) * de
        ts1 = _ts_rows(obs1, anchor_sq, model)
        return start, ts0, ts1

    blocks = range((trials + _BLOCK - 1) // _BLOCK)
    ts_h0 = np.empty(trials)
    ts_h1 = np.empty(trials)
    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(run_block, blocks)
            for start, t0, t1 in results:
                ts_h0[start:start + t0.size] = t0
                ts_h1[start:start + t1.size] = t1
    else:
        for g in blocks:
            start, t0, t1 = run_block(g)
            ts_h0[start:start + t0.size] = t0
            ts_h1[start:start + t1.size] = t1
    return ts_h0, ts_h1


def empirical_rates(scenario: Scenario, config: DecisionConfig, trials: int,
                    master_seed, *, eve_mode: str = "fixed",
                    workers: int = 1) -> ErrorRates:
    """Monte Carlo error rates over independent H0 and H1 transmissions.

    Deterministic in (master_seed, trials) regardless of worker count.
    """
    ts_h0, ts_h1 = simulate_test_statistics(
        scenario, trials, master_seed, eve_mode=eve_mode, workers=workers)
    p_fa = float(np.count_nonzero(ts_h0 > config.threshold)) / trials
    p_md = float(np.count_nonzero(ts_h1 <= config.threshold)) / trials
    return ErrorRates(
        p_fa=p_fa,
        p_md=p_md,
        method="empirical",
        stderr_fa=float(np.sqrt(p_fa * (1.0 - p_fa) / trials)),
        stderr_md=float(np.sqrt(p_md * (1.0 - p_md) / trials)),
        trials=trials,
    )


def _lift(point) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    return np.array([p[0], p[1], p[0] ** 2 + p[1] ** 2])


def _ts_rows(observed_sq: np.ndarray, anchor_sq: np.ndarray,
             model: np.ndarray) -> np.ndarray:
    residual = (observed_sq - anchor_sq) - model
    return (residual ** 2).sum(axis=1)


def _seed_entropy(master_seed) -> tuple:
    if isinstance(master_seed, (tuple, list)):
        return tuple(int(s) for s in master_seed)
    return (int(master_seed),)
