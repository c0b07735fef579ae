"""Anchor geometry and least-squares position estimation.

Anchors at known positions measure one-way time of arrival, which yields
noisy squared-distance observations after the linearization
d_hat^2 = d^2 + 2*n*d (n is zero-mean Gaussian range noise). Squared
observations feed a linear system whose unknown is the lifted vector
X = (x, y, x^2 + y^2); positions come out of its least-squares solution.

All coordinates and distances are in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, distance_noise_variance
from .errors import DomainError, GeometryError

__all__ = [
    "AnchorArray",
    "Scenario",
    "NoisySquaredDistances",
    "true_distance",
    "sample_noisy_squared_distances",
    "sample_noisy_squared_distances_batch",
    "build_system",
    "solve_position",
    "consistency_gap",
]

# Smallest acceptable ratio of the design matrix's extreme singular values.
_RANK_RTOL = 1e-9


@dataclass(frozen=True)
class AnchorArray:
    """Fixed anchor positions, shape (L, 2) with L >= 3."""

    xy: np.ndarray

    def __post_init__(self):
        xy = np.atleast_2d(np.asarray(self.xy, dtype=float))
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise GeometryError("anchors must be an (L, 2) array of coordinates")
        if xy.shape[0] < 3:
            raise GeometryError("at least 3 anchors are required")
        if not np.all(np.isfinite(xy)):
            raise GeometryError("anchor coordinates must be finite")
        object.__setattr__(self, "xy", xy)
        sv = np.linalg.svd(self.design_matrix(), compute_uv=False)
        if sv[-1] <= _RANK_RTOL * sv[0]:
            raise GeometryError(
                "degenerate anchor geometry: design matrix is rank deficient")

    def __len__(self) -> int:
        return self.xy.shape[0]

    def design_matrix(self) -> np.ndarray:
        """Coefficient matrix of the lifted linear system, shape (L, 3)."""
        x, y = self.xy[:, 0], self.xy[:, 1]
        return np.column_stack([-2.0 * x, -2.0 * y, np.ones_like(x)])

    def distances_to(self, point) -> np.ndarray:
        """Euclidean distances from every anchor to a point, shape (L,)."""
        p = np.asarray(point, dtype=float)
        d = np.hypot(self.xy[:, 0] - p[0], self.xy[:, 1] - p[1])
        if np.any(d == 0.0):
            raise GeometryError("point coincides with an anchor")
        return d


@dataclass(frozen=True)
class Scenario:
    """One authentication scenario: geometry plus channel configuration.

    eve is the impersonator's true position; it may be None for setups
    that only exercise the legitimate-transmitter hypothesis or draw the
    impersonator position elsewhere. The deployment region is a
    width_m x height_m rectangle centered on the origin.
    """

    anchors: AnchorArray
    alice: np.ndarray
    eve: np.ndarray | None
    channel: ChannelParams
    region: tuple[float, float] = (1000.0, 1000.0)

    def __post_init__(self):
        object.__setattr__(self, "alice", np.asarray(self.alice, dtype=float))
        if self.eve is not None:
            object.__setattr__(self, "eve", np.asarray(self.eve, dtype=float))
        w, h = self.region
        if not (w > 0 and h > 0):
            raise DomainError("region dimensions must be positive")
        for name, pt in (("alice", self.alice), ("eve", self.eve)):
            if pt is None:
                continue
            if pt.shape != (2,) or not np.all(np.isfinite(pt)):
                raise DomainError(f"{name} must be a finite (x, y) pair")
            if abs(pt[0]) > w / 2 or abs(pt[1]) > h / 2:
                raise DomainError(f"{name} lies outside the deployment region")
            self.anchors.distances_to(pt)  # rejects coincidence with an anchor

    def alice_distances(self) -> np.ndarray:
        return self.anchors.distances_to(self.alice)

    def eve_distances(self) -> np.ndarray:
        if self.eve is None:
            raise DomainError("scenario has no eve position")
        return self.anchors.distances_to(self.eve)


@dataclass(frozen=True)
class NoisySquaredDistances:
    """Squared-distance observations for one transmission, all shape (L,)."""

    true_distance_m: np.ndarray
    noise_std_m: np.ndarray
    observed_sq_m2: np.ndarray


def true_distance(point, anchor) -> float:
    """Euclidean distance between a node and one anchor."""
    p = np.asarray(point, dtype=float)
    a = np.asarray(anchor, dtype=float)
    d = float(np.hypot(*(p - a)))
    if d == 0.0:
        raise GeometryError("point coincides with an anchor")
    return d


def sample_noisy_squared_distances(point, anchors: AnchorArray,
                                   channel: ChannelParams,
                                   rng: np.random.Generator, *,
                                   exact: bool = False,
                                   noise_std_override=None) -> NoisySquaredDistances:
    """Draw one set of noisy squared-distance observations.

    The default follows the linearized model d_hat^2 = d^2 + 2*n*d.
    With exact=True the range itself is perturbed and then squared,
    which adds the quadratic n^2 term; useful for sensitivity studies.
    noise_std_override replaces the channel-derived sigma per anchor
    (a scalar or length-L array; 0 gives noiseless observations).
    """
    d, sigma, obs = sample_noisy_squared_distances_batch(
        point, anchors, channel, rng, 1, exact=exact,
        noise_std_override=noise_std_override)
    return NoisySquaredDistances(d, sigma, obs[0])


def sample_noisy_squared_distances_batch(point, anchors: AnchorArray,
                                         channel: ChannelParams,
                                         rng: np.random.Generator,
                                         n: int, *,
                                         exact: bool = False,
                                         noise_std_override=None):
    """Vectorized sampler: returns (d, sigma, observed_sq) with
    observed_sq of shape (n, L)."""
    d = anchors.distances_to(point)
    if noise_std_override is None:
        sigma = np.sqrt(distance_noise_variance(d, channel))
    else:
        sigma = np.broadcast_to(
            np.asarray(noise_std_override, dtype=float), d.shape).copy()
        if np.any(sigma < 0):
            raise DomainError("noise std override must be nonnegative")
    noise = rng.standard_normal((n, len(d))) * sigma
    if exact:
        obs = (d + noise) ** 2
    else:
        obs = d * d + 2.0 * noise * d
    return d, sigma, obs


def build_system(anchors: AnchorArray, observed_sq) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the lifted linear system (A, b) from squared observations.

    Row i reads -2*x_i*x - 2*y_i*y + (x^2 + y^2) = d_hat_i^2 - x_i^2 - y_i^2.
    """
    obs = np.asarray(observed_sq, dtype=float)
    if obs.shape[-1] != len(anchors):
        raise DomainError("one squared observation per anchor is required")
    A = anchors.design_matrix()
    b = obs - (anchors.xy ** 2).sum(axis=1)
    return A, b


def solve_position(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares solution X = (x, y, s) of the lifted system.

    Uses an orthogonal factorization rather than the normal equations.
    Raises GeometryError when A is numerically rank deficient.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] <= _RANK_RTOL * sv[0]:
        raise GeometryError(
            "degenerate anchor geometry: design matrix is rank deficient")
    X, *_ = np.linalg.lstsq(A, b, rcond=None)
    return X


def consistency_gap(X) -> float:
    """Distance between the lifted coordinate and x^2 + y^2 for a solution."""
    X = np.asarray(X, dtype=float)
    return float(abs(X[2] - (X[0] ** 2 + X[1] ** 2)))
