"""Domain types shared across the package and the random-stream contract."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Invalid scenario or type parameters."""


class InapplicableTestError(ValueError):
    """A test cannot be applied to the given design (e.g. BOLS with n < 3)."""


class DegenerateVarianceError(ArithmeticError):
    """A studentized statistic has a zero variance estimate."""


class PolicyTag(str, enum.Enum):
    STANDARD_TS = "StandardTS"
    RESTRICTED_TS_BOLS = "RestrictedTS_BOLS"
    RESTRICTED_TS_AWAIPW = "RestrictedTS_AWAIPW"
    ORACLE = "Oracle"
    UNIFORM_ER = "UniformER"


class StreamPurpose(enum.IntEnum):
    """Domain tag mixed into substream derivation so different uses never collide."""

    TRAJECTORY = 0
    CALIBRATION = 1
    DECISION = 2
    CRITICAL_VALUE = 3
    POSTERIOR_MC = 4


@dataclass(frozen=True)
class GaussianPrior:
    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ConfigError("prior mean and variance must be finite")
        if self.variance <= 0:
            raise ConfigError(f"prior variance must be > 0, got {self.variance}")


@dataclass(frozen=True)
class RewardParams:
    """Arm means and the shared, known reward variance.

    ``mu`` holds one mean per arm; arm 0 is the control.
    """

    mu: tuple[float, ...]
    sigma2_y: float

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(m) for m in self.mu))
        if len(self.mu) < 2:
            raise ConfigError("at least two arms are required")
        if not all(math.isfinite(m) for m in self.mu):
            raise ConfigError("arm means must be finite")
        if not (math.isfinite(self.sigma2_y) and self.sigma2_y > 0):
            raise ConfigError(f"sigma2_y must be > 0, got {self.sigma2_y}")

    @classmethod
    def two_arm(cls, mu0: float, mu1: float, sigma2_y: float) -> "RewardParams":
        return cls((mu0, mu1), sigma2_y)

    @property
    def mu0(self) -> float:
        return self.mu[0]

    @property
    def mu1(self) -> float:
        return self.mu[1]

    @property
    def num_arms(self) -> int:
        return len(self.mu)


@dataclass(frozen=True)
class BatchSchedule:
    """``T`` post-baseline steps (t = 0..T) of ``n`` participants each."""

    T: int
    n: int

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ConfigError(f"T must be an integer >= 1, got {self.T}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be an integer >= 1, got {self.n}")

    @property
    def steps(self) -> int:
        return self.T + 1

    @property
    def N(self) -> int:
        return (self.T + 1) * self.n

    @classmethod
    def from_total(cls, N: int, n: int) -> "BatchSchedule":
        if N % n:
            raise ConfigError(f"N={N} is not a multiple of n={n}")
        return cls(N // n - 1, n)


@dataclass(frozen=True)
class PosteriorState:
    """Conjugate Gaussian sufficient statistics: per-arm counts and reward sums."""

    counts: tuple[int, ...]
    sums: tuple[float, ...]
    prior: GaussianPrior
    sigma2_y: float

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "sums", tuple(float(s) for s in self.sums))
        if len(self.counts) != len(self.sums) or len(self.counts) < 2:
            raise ConfigError("counts and sums must have one entry per arm (>= 2 arms)")
        if any(c < 0 for c in self.counts):
            raise ConfigError("counts must be non-negative")

    @classmethod
    def empty(cls, prior: GaussianPrior, sigma2_y: float, num_arms: int = 2) -> "PosteriorState":
        return cls((0,) * num_arms, (0.0,) * num_arms, prior, sigma2_y)

    @property
    def num_arms(self) -> int:
        return len(self.counts)

    def update(self, arm: int, reward: float) -> "PosteriorState":
        counts = list(self.counts)
        sums = list(self.sums)
        counts[arm] += 1
        sums[arm] += reward
        return PosteriorState(tuple(counts), tuple(sums), self.prior, self.sigma2_y)

    def update_batch(self, arms, rewards) -> "PosteriorState":
        arms = np.asarray(arms, dtype=np.int64)
        rewards = np.asarray(rewards, dtype=float)
        counts = np.array(self.counts, dtype=np.int64)
        sums = np.array(self.sums, dtype=float)
        for k in range(self.num_arms):
            mask = arms == k
            counts[k] += int(mask.sum())
            sums[k] += float(rewards[mask].sum())
        return PosteriorState(tuple(counts), tuple(sums), self.prior, self.sigma2_y)

    def arm_posterior(self, arm: int) -> tuple[float, float]:
        """Posterior (mean, variance) of one arm's mean reward."""
        s2p = self.prior.variance
        s2y = self.sigma2_y
        denom = s2y + self.counts[arm] * s2p
        mean = (s2y * self.prior.mean + s2p * self.sums[arm]) / denom
        return mean, s2p * s2y / denom


@dataclass(frozen=True)
class TrialHistory:
    """Complete log of one simulated (or observed) experiment.

    ``alloc_prob[t]`` is the experimental-arm probability frozen for batch t;
    ``assignments`` and ``rewards`` have shape (T+1, n).
    """

    schedule: BatchSchedule
    alloc_prob: np.ndarray
    assignments: np.ndarray
    rewards: np.ndarray
    policy_tag: PolicyTag = PolicyTag.STANDARD_TS

    def __post_init__(self):
        alloc = np.asarray(self.alloc_prob, dtype=float)
        arms = np.asarray(self.assignments, dtype=np.int8)
        rewards = np.asarray(self.rewards, dtype=float)
        shape = (self.schedule.steps, self.schedule.n)
        if alloc.shape != (self.schedule.steps,):
            raise ConfigError(f"alloc_prob must have shape ({self.schedule.steps},), got {alloc.shape}")
        if arms.shape != shape or rewards.shape != shape:
            raise ConfigError(f"assignments/rewards must have shape {shape}")
        for name, arr in (("alloc_prob", alloc), ("assignments", arms), ("rewards", rewards)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "policy_tag", PolicyTag(self.policy_tag))

    @property
    def T(self) -> int:
        return self.schedule.T

    @property
    def n(self) -> int:
        return self.schedule.n

    def posterior_state(self, prior: GaussianPrior, sigma2_y: float, upto: int | None = None) -> PosteriorState:
        """Sufficient statistics of the data from steps ``0..upto-1`` (all steps by default)."""
        stop = self.schedule.steps if upto is None else upto
        arms = self.assignments[:stop].ravel()
        rewards = self.rewards[:stop].ravel()
        return PosteriorState.empty(prior, sigma2_y).update_batch(arms, rewards)

    def is_randomized(self) -> bool:
        return bool(np.all((self.alloc_prob > 0) & (self.alloc_prob < 1)))

    def same_as(self, other: "TrialHistory") -> bool:
        return (
            self.schedule == other.schedule
            and self.policy_tag == other.policy_tag
            and np.array_equal(self.alloc_prob, other.alloc_prob)
            and np.array_equal(self.assignments, other.assignments)
            and np.array_equal(self.rewards, other.rewards)
        )


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    critical_value: float
    alpha_target: float
    exceedance_at_critical: float
    exceedance_above_critical: float
    gamma_applied: float
    reject: bool
    test: str = ""

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return {
            "test": self.test,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "alpha_target": self.alpha_target,
            "exceedance_at_critical": self.exceedance_at_critical,
            "exceedance_above_critical": self.exceedance_above_critical,
            "gamma_applied": self.gamma_applied,
            "reject": self.reject,
        }


@dataclass
class RandomStream:
    """A substream owned by a single trajectory (or a single worker task).

    Wraps a numpy ``Generator`` seeded from ``SeedSequence(master_seed,
    spawn_key=(purpose, index))``, so re-deriving always reproduces the
    same draws and distinct keys never share state.
    """

    master_seed: int
    index: int
    purpose: int = StreamPurpose.TRAJECTORY
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(int(self.master_seed) & (2**64 - 1),
                                     spawn_key=(int(self.purpose), int(self.index)))
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def random(self, size=None):
        return self.generator.random(size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)


def derive_stream(master_seed: int, index: int, purpose: int = StreamPurpose.TRAJECTORY) -> RandomStream:
    if index < 0:
        raise ValueError(f"stream index must be >= 0, got {index}")
    return RandomStream(master_seed, index, purpose)
