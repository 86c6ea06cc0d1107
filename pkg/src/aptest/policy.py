"""Thompson Sampling allocation probabilities, clipping, and arm selection.

Two-arm probabilities use the closed-form Gaussian expression
``Phi(mu_D / sigma_D)``; the array variants below are what the simulation
engine calls, and they perform the same floating-point operations as the
scalar functions so a single trajectory reproduces exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .core import ConfigError, GaussianPrior, PosteriorState, RandomStream

# Phi saturates to exactly 0/1 in double precision for |z| > ~38 / ~8.3;
# keep recorded probabilities strictly inside (0, 1).
PROB_FLOOR = 2.0**-53
PROB_CEIL = 1.0 - 2.0**-53


class ClipVariant(str, enum.Enum):
    NONE = "None"
    FIXED_RANGE = "FixedRange"
    TIME_DECAYING = "TimeDecaying"


@dataclass(frozen=True)
class ClippingScheme:
    """Bounds imposed on the TS probability.

    ``TimeDecaying`` uses the lower bound ``t**-exponent / k`` (``k`` is the
    number of arms, 2 by default), capped at 0.5 so the interval never inverts.
    """

    variant: ClipVariant = ClipVariant.NONE
    pi_min: float = 0.1
    pi_max: float = 0.9
    k: float = 2.0
    exponent: float = 0.7

    def __post_init__(self):
        object.__setattr__(self, "variant", ClipVariant(self.variant))
        if self.variant is ClipVariant.FIXED_RANGE and not 0 < self.pi_min <= self.pi_max < 1:
            raise ConfigError(f"need 0 < pi_min <= pi_max < 1, got [{self.pi_min}, {self.pi_max}]")
        if self.variant is ClipVariant.TIME_DECAYING and self.k <= 0:
            raise ConfigError("k must be positive")

    @classmethod
    def none(cls) -> "ClippingScheme":
        return cls(ClipVariant.NONE)

    @classmethod
    def fixed_range(cls, pi_min: float = 0.1, pi_max: float = 0.9) -> "ClippingScheme":
        return cls(ClipVariant.FIXED_RANGE, pi_min=pi_min, pi_max=pi_max)

    @classmethod
    def symmetric(cls, threshold: float) -> "ClippingScheme":
        """``[threshold, 1 - threshold]``; a zero threshold means no clipping."""
        if threshold == 0:
            return cls.none()
        return cls.fixed_range(threshold, 1.0 - threshold)

    @classmethod
    def time_decaying(cls, k: float = 2.0, exponent: float = 0.7) -> "ClippingScheme":
        return cls(ClipVariant.TIME_DECAYING, k=k, exponent=exponent)

    def bounds(self, t: int) -> tuple[float, float]:
        if self.variant is ClipVariant.FIXED_RANGE:
            return self.pi_min, self.pi_max
        if self.variant is ClipVariant.TIME_DECAYING:
            lo = min(0.5, max(t, 1) ** -self.exponent / self.k)
            return lo, 1.0 - lo
        return 0.0, 1.0


def posterior_params(state: PosteriorState, arm1: int = 1, arm0: int = 0) -> tuple[float, float]:
    """Mean and standard deviation of the posterior of ``mu[arm1] - mu[arm0]``."""
    m1, v1 = state.arm_posterior(arm1)
    m0, v0 = state.arm_posterior(arm0)
    return m1 - m0, math.sqrt(v1 + v0)


def ts_alloc_prob(state: PosteriorState) -> float:
    mu_d, sigma_d = posterior_params(state)
    p = float(ndtr(mu_d / sigma_d))
    return min(max(p, PROB_FLOOR), PROB_CEIL)


def ts_alloc_prob_arrays(n1, s1, n0, s0, prior: GaussianPrior, sigma2_y: float) -> np.ndarray:
    """Vectorised ``ts_alloc_prob`` over arrays of sufficient statistics."""
    s2p = prior.variance
    num = sigma2_y * prior.mean
    d1 = sigma2_y + n1 * s2p
    d0 = sigma2_y + n0 * s2p
    mu_d = (num + s2p * s1) / d1 - (num + s2p * s0) / d0
    sigma_d = np.sqrt(s2p * sigma2_y / d1 + s2p * sigma2_y / d0)
    return np.clip(ndtr(mu_d / sigma_d), PROB_FLOOR, PROB_CEIL)


def clip(prob: float, scheme: ClippingScheme, t: int) -> float:
    if scheme.variant is ClipVariant.NONE:
        return prob
    lo, hi = scheme.bounds(t)
    return min(hi, max(prob, lo))


def clip_array(prob: np.ndarray, scheme: ClippingScheme, t: int) -> np.ndarray:
    if scheme.variant is ClipVariant.NONE:
        return prob
    lo, hi = scheme.bounds(t)
    return np.minimum(hi, np.maximum(prob, lo))


def select_arm(prob_arm1: float, stream: RandomStream) -> int:
    return 1 if stream.random() < prob_arm1 else 0


def mc_alloc_probs(state: PosteriorState, M: int, stream: RandomStream) -> np.ndarray:
    """Fraction of ``M`` joint posterior draws in which each arm has the largest sample."""
    if M < 1:
        raise ValueError("M must be >= 1")
    K1 = state.num_arms
    means, variances = zip(*(state.arm_posterior(k) for k in range(K1)))
    draws = np.asarray(means) + np.sqrt(variances) * stream.normal((M, K1))
    winners = draws.argmax(axis=1)
    is_max = draws == draws.max(axis=1, keepdims=True)
    tied = np.flatnonzero(is_max.sum(axis=1) > 1)
    for row in tied:
        candidates = np.flatnonzero(is_max[row])
        winners[row] = candidates[stream.integers(len(candidates))]
    return np.bincount(winners, minlength=K1) / M


_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(96)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2 * math.pi)


def ts_alloc_probs(means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """Multi-arm TS probabilities by Gauss-Hermite quadrature.

    ``means`` and ``variances`` have shape (..., K+1). Returns
    ``P(arm k attains the largest posterior draw)`` along the last axis,
    renormalised to sum to one.
    """
    means = np.asarray(means, dtype=float)
    sds = np.sqrt(np.asarray(variances, dtype=float))
    K1 = means.shape[-1]
    out = np.empty(means.shape)
    z = _GH_NODES
    for k in range(K1):
        x = means[..., k, None] + sds[..., k, None] * z  # (..., nodes)
        log_prod = np.zeros(x.shape)
        for j in range(K1):
            if j == k:
                continue
            cdf = ndtr((x - means[..., j, None]) / sds[..., j, None])
            log_prod += np.log(np.maximum(cdf, 1e-300))
        out[..., k] = np.exp(log_prod) @ _GH_WEIGHTS
    out = np.clip(out, 0.0, None)
    return out / out.sum(axis=-1, keepdims=True)
