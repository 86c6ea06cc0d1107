"""Gaussian reward generators: stationary and the two polynomial-decay regimes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ConfigError, RandomStream, RewardParams


class RegimeVariant(str, enum.Enum):
    STATIONARY = "Stationary"
    NS1 = "NS1"
    NS2 = "NS2"


@dataclass(frozen=True)
class RewardRegime:
    """How arm means evolve over steps.

    NS1 decays the control mean as ``base_mean / (t+1)**decay`` and keeps a
    constant effect ``delta``; NS2 holds the control at 0 and decays the
    experimental arm. With ``null=True`` every arm follows the decaying
    baseline (NS1/NS2) or the control mean (Stationary).
    """

    variant: RegimeVariant
    params: RewardParams
    base_mean: float = 1.0
    decay: float = 0.5
    delta: float = 0.5
    null: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", RegimeVariant(self.variant))
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigError(f"decay exponent must lie in [0, 1], got {self.decay}")
        if self.variant is not RegimeVariant.STATIONARY and self.params.num_arms != 2:
            raise ConfigError("non-stationary regimes are defined for two arms only")

    @classmethod
    def stationary(cls, mu0: float, mu1: float, sigma2_y: float) -> "RewardRegime":
        return cls(RegimeVariant.STATIONARY, RewardParams.two_arm(mu0, mu1, sigma2_y))

    @property
    def num_arms(self) -> int:
        return self.params.num_arms

    @property
    def sigma2_y(self) -> float:
        return self.params.sigma2_y

    def as_null(self) -> "RewardRegime":
        return replace(self, null=True)

    def as_alternative(self) -> "RewardRegime":
        return replace(self, null=False)

    def mean_table(self, steps: int) -> np.ndarray:
        """Means for every arm and step, shape (num_arms, steps)."""
        return np.array([[mean_at(self, k, t) for t in range(steps)] for k in range(self.num_arms)])


def mean_at(regime: RewardRegime, arm: int, t: int) -> float:
    if not 0 <= arm < regime.num_arms:
        raise ValueError(f"unknown arm index {arm} for a {regime.num_arms}-arm regime")
    if t < 0:
        raise ValueError(f"step index must be >= 0, got {t}")
    if regime.variant is RegimeVariant.STATIONARY:
        return regime.params.mu[0] if regime.null else regime.params.mu[arm]
    decayed = regime.base_mean / (t + 1) ** regime.decay
    if regime.null:
        return decayed
    if regime.variant is RegimeVariant.NS1:
        return decayed + regime.delta if arm == 1 else decayed
    return decayed if arm == 1 else 0.0


def draw_reward(regime: RewardRegime, arm: int, t: int, stream: RandomStream, sigma2_y: float | None = None) -> float:
    """One Gaussian reward; ``sigma2_y`` overrides the regime variance (0 gives the mean)."""
    mean = mean_at(regime, arm, t)
    var = regime.sigma2_y if sigma2_y is None else sigma2_y
    return mean + math.sqrt(var) * float(stream.normal())
