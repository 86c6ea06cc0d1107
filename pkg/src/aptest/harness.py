"""Scenario execution: trajectory simulation, regret metrics and error-rate estimation.

The simulation engine is vectorised across trajectories. Each trajectory
still owns its random substream: before the policy loop, trajectory ``j``
draws its uniforms (T+1, n), standard normals (T+1, n) and coverage picks
(T+1,) from ``derive_stream(seed, j, purpose)``. Any subset of indices can
therefore be simulated in any chunking, on any number of workers, and
produce identical rows.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtr

from . import ap_test as apt
from . import calibration as cal
from . import comparators as cmp
from .core import (BatchSchedule, ConfigError, GaussianPrior, InapplicableTestError, PolicyTag,
                   RandomStream, StreamPurpose, TestOutcome, TrialHistory, derive_stream)
from .policy import ClippingScheme, clip_array, ts_alloc_prob_arrays, ts_alloc_probs
from .rewards import RewardRegime

WORKERS_ENV = "APTEST_WORKERS"
BOLS_CRITICAL_DRAWS = 100_000


class Hypothesis(str, enum.Enum):
    H0 = "H0"
    H1 = "H1"


class TestKind(str, enum.Enum):
    AP = "ap"
    BOLS = "bols"
    AWAIPW = "awaipw"

    __test__ = False


# policy each test is evaluated under unless the scenario says otherwise
MATCHING_POLICY = {
    TestKind.AP: PolicyTag.STANDARD_TS,
    TestKind.BOLS: PolicyTag.RESTRICTED_TS_BOLS,
    TestKind.AWAIPW: PolicyTag.RESTRICTED_TS_AWAIPW,
}

_TS_POLICIES = (PolicyTag.STANDARD_TS, PolicyTag.RESTRICTED_TS_BOLS, PolicyTag.RESTRICTED_TS_AWAIPW)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated experiment design.

    Under ``H0`` the regime is switched to its null form (equal arm means),
    so the same config object can be flipped between hypotheses with
    ``null_config`` / ``alternative_config``. ``clipping`` overrides the
    policy's default clipping scheme.
    """

    schedule: BatchSchedule
    regime: RewardRegime
    prior: GaussianPrior = field(default_factory=GaussianPrior)
    policy: PolicyTag = PolicyTag.STANDARD_TS
    hypothesis: Hypothesis = Hypothesis.H1
    alpha: float = 0.05
    trajectories: int = 10_000
    master_seed: int = 0
    scenario_id: str = "scenario"
    clipping: ClippingScheme | None = None
    delta_null: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "policy", PolicyTag(self.policy))
        object.__setattr__(self, "hypothesis", Hypothesis(self.hypothesis))
        null = self.hypothesis is Hypothesis.H0
        object.__setattr__(self, "regime", self.regime.as_null() if null else self.regime.as_alternative())
        if not 0 <= self.alpha < 1:
            raise ConfigError(f"alpha must lie in [0, 1), got {self.alpha}")
        if int(self.trajectories) != self.trajectories or self.trajectories < 1:
            raise ConfigError(f"trajectories must be a positive integer, got {self.trajectories}")
        if self.num_arms > 2 and self.policy not in (PolicyTag.STANDARD_TS, PolicyTag.ORACLE, PolicyTag.UNIFORM_ER):
            raise ConfigError(f"{self.policy.value} is defined for two arms only")

    @property
    def num_arms(self) -> int:
        return self.regime.num_arms

    @property
    def ap_threshold(self) -> float:
        return 1.0 / self.num_arms

    @property
    def clipping_scheme(self) -> ClippingScheme:
        if self.clipping is not None:
            return self.clipping
        if self.policy is PolicyTag.RESTRICTED_TS_BOLS:
            return ClippingScheme.fixed_range()
        if self.policy is PolicyTag.RESTRICTED_TS_AWAIPW:
            return ClippingScheme.time_decaying(k=self.num_arms)
        return ClippingScheme.none()

    @property
    def forces_coverage(self) -> bool:
        return self.policy is PolicyTag.RESTRICTED_TS_BOLS and self.schedule.n >= 2

    def null_config(self) -> "ScenarioConfig":
        return replace(self, hypothesis=Hypothesis.H0)

    def alternative_config(self) -> "ScenarioConfig":
        return replace(self, hypothesis=Hypothesis.H1)

    def with_policy(self, policy: PolicyTag) -> "ScenarioConfig":
        return replace(self, policy=PolicyTag(policy))


@dataclass(frozen=True)
class HistoryBatch:
    """Stacked trajectories.

    ``alloc_prob`` (M, T+1) is the experimental arm's probability (arm 1,
    or arm K with K+1 arms). With more than two arms, ``arm_probs`` holds
    the full (M, T+1, K+1) allocation and ``pairwise`` the (M, T+1, K)
    posterior probabilities that the experimental arm beats each control.
    """

    schedule: BatchSchedule
    policy_tag: PolicyTag
    alloc_prob: np.ndarray
    assignments: np.ndarray
    rewards: np.ndarray
    arm_probs: np.ndarray | None = None
    pairwise: np.ndarray | None = None

    def __len__(self) -> int:
        return self.alloc_prob.shape[0]

    def history(self, i: int) -> TrialHistory:
        return TrialHistory(self.schedule, self.alloc_prob[i], self.assignments[i], self.rewards[i], self.policy_tag)

    @classmethod
    def concat(cls, parts: list["HistoryBatch"]) -> "HistoryBatch":
        first = parts[0]
        stack = lambda name: None if getattr(first, name) is None else np.concatenate([getattr(p, name) for p in parts])
        return cls(first.schedule, first.policy_tag, stack("alloc_prob"), stack("assignments"),
                   stack("rewards"), stack("arm_probs"), stack("pairwise"))


def _draw_noise(stream: RandomStream, steps: int, n: int):
    g = stream.generator
    return g.random((steps, n)), g.standard_normal((steps, n)), g.integers(0, n, steps)


def _run_engine(config: ScenarioConfig, U, Z, picks) -> HistoryBatch:
    if config.num_arms > 2:
        return _run_engine_multi(config, U, Z, picks)
    M, steps, n = U.shape
    means = config.regime.mean_table(steps)
    sd = math.sqrt(config.regime.sigma2_y)
    scheme = config.clipping_scheme
    n1 = np.zeros(M)
    n0 = np.zeros(M)
    s1 = np.zeros(M)
    s0 = np.zeros(M)
    alloc = np.empty((M, steps))
    arms_out = np.empty((M, steps, n), dtype=np.int8)
    rewards = np.empty((M, steps, n))
    rows = np.arange(M)
    for t in range(steps):
        if config.policy in _TS_POLICIES:
            p = clip_array(ts_alloc_prob_arrays(n1, s1, n0, s0, config.prior, config.regime.sigma2_y), scheme, t)
        elif config.policy is PolicyTag.UNIFORM_ER:
            p = np.full(M, 0.5)
        else:
            gap = means[1, t] - means[0, t]
            p = np.full(M, 1.0 if gap > 0 else 0.0 if gap < 0 else 0.5)
        alloc[:, t] = p
        arms = U[:, t] < p[:, None]
        if config.forces_coverage:
            pick = picks[:, t]
            all1 = arms.all(axis=1)
            all0 = ~arms.any(axis=1)
            arms[rows[all1], pick[all1]] = False
            arms[rows[all0], pick[all0]] = True
        y = np.where(arms, means[1, t], means[0, t]) + sd * Z[:, t]
        arms_out[:, t] = arms
        rewards[:, t] = y
        k1 = arms.sum(axis=1)
        n1 += k1
        n0 += n - k1
        s1 += np.where(arms, y, 0.0).sum(axis=1)
        s0 += np.where(arms, 0.0, y).sum(axis=1)
    return HistoryBatch(config.schedule, config.policy, alloc, arms_out, rewards)


def _run_engine_multi(config: ScenarioConfig, U, Z, picks) -> HistoryBatch:
    M, steps, n = U.shape
    K1 = config.num_arms
    means = config.regime.mean_table(steps)
    sd = math.sqrt(config.regime.sigma2_y)
    s2p, s2y, pm = config.prior.variance, config.regime.sigma2_y, config.prior.mean
    counts = np.zeros((M, K1))
    sums = np.zeros((M, K1))
    probs = np.empty((M, steps, K1))
    pairwise = np.empty((M, steps, K1 - 1))
    arms_out = np.empty((M, steps, n), dtype=np.int8)
    rewards = np.empty((M, steps, n))
    for t in range(steps):
        denom = s2y + counts * s2p
        post_mean = (s2y * pm + s2p * sums) / denom
        post_var = s2p * s2y / denom
        pairwise[:, t] = ndtr((post_mean[:, -1:] - post_mean[:, :-1]) / np.sqrt(post_var[:, -1:] + post_var[:, :-1]))
        if config.policy is PolicyTag.STANDARD_TS:
            p = ts_alloc_probs(post_mean, post_var)
        elif config.policy is PolicyTag.UNIFORM_ER:
            p = np.full((M, K1), 1.0 / K1)
        else:
            best = means[:, t] == means[:, t].max()
            p = np.broadcast_to(best / best.sum(), (M, K1))
        probs[:, t] = p
        edges = np.cumsum(p, axis=1)[:, :-1]
        arms = (U[:, t, :, None] >= edges[:, None, :]).sum(axis=-1)
        y = means[arms, t] + sd * Z[:, t]
        arms_out[:, t] = arms
        rewards[:, t] = y
        for k in range(K1):
            on = arms == k
            counts[:, k] += on.sum(axis=1)
            sums[:, k] += np.where(on, y, 0.0).sum(axis=1)
    return HistoryBatch(config.schedule, config.policy, probs[:, :, -1].copy(), arms_out, rewards, probs, pairwise)


def run_trajectory(config: ScenarioConfig, stream: RandomStream) -> TrialHistory:
    """Simulate one experiment, drawing all noise from ``stream``."""
    U, Z, picks = _draw_noise(stream, config.schedule.steps, config.schedule.n)
    return _run_engine(config, U[None], Z[None], picks[None]).history(0)


def _simulate_indices(config: ScenarioConfig, seed: int, indices, purpose: int) -> HistoryBatch:
    steps, n = config.schedule.steps, config.schedule.n
    M = len(indices)
    U = np.empty((M, steps, n))
    Z = np.empty((M, steps, n))
    picks = np.empty((M, steps), dtype=np.int64)
    for row, j in enumerate(indices):
        U[row], Z[row], picks[row] = _draw_noise(derive_stream(seed, j, purpose), steps, n)
    return _run_engine(config, U, Z, picks)


def _chunk_task(args):
    config, seed, start, stop, purpose = args
    return _simulate_indices(config, seed, range(start, stop), purpose)


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(workers))


def simulate(config: ScenarioConfig, M: int | None = None, seed: int | None = None,
             purpose: int = StreamPurpose.TRAJECTORY, start: int = 0,
             workers: int | None = None, chunk: int = 2_000) -> HistoryBatch:
    """Trajectories ``start .. start+M-1`` of a scenario, stacked."""
    M = config.trajectories if M is None else int(M)
    seed = config.master_seed if seed is None else seed
    bounds = [(s, min(s + chunk, start + M)) for s in range(start, start + M, chunk)]
    tasks = [(config, seed, a, b, int(purpose)) for a, b in bounds]
    workers = worker_count(workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_task, tasks))
    else:
        parts = [_chunk_task(task) for task in tasks]
    return HistoryBatch.concat(parts)


def run_trajectories(config: ScenarioConfig, M: int | None = None, seed: int | None = None,
                     workers: int | None = None) -> list[TrialHistory]:
    batch = simulate(config, M, seed, workers=workers)
    return [batch.history(i) for i in range(len(batch))]


# --- metrics ---------------------------------------------------------------

def regret_curves(assignments: np.ndarray, regime: RewardRegime) -> np.ndarray:
    """Cumulative per-participant regret, shape (M, N) in (t, i) order."""
    assignments = np.asarray(assignments)
    steps = assignments.shape[1]
    means = regime.mean_table(steps)  # (arms, steps)
    gap = means.max(axis=0, keepdims=True) - means
    per = gap[assignments, np.arange(steps)[None, :, None]]
    return np.cumsum(per.reshape(per.shape[0], -1), axis=1)


def regret_curve(history: TrialHistory, regime: RewardRegime) -> np.ndarray:
    return regret_curves(np.asarray(history.assignments)[None], regime)[0]


def optimal_arm_proportion(assignments: np.ndarray, regime: RewardRegime) -> np.ndarray:
    """Per-step share of participants (over all trajectories) given a best arm."""
    assignments = np.asarray(assignments)
    steps = assignments.shape[1]
    means = regime.mean_table(steps)
    is_best = means == means.max(axis=0, keepdims=True)  # (arms, steps)
    hit = is_best[assignments, np.arange(steps)[None, :, None]]
    return hit.mean(axis=(0, 2))


@dataclass
class MetricsReport:
    scenario_id: str
    test: str
    hypothesis: str
    alpha: float
    rate: float
    stderr: float
    M: int
    calibrated: bool
    mean_final_regret: float
    regret_curve: np.ndarray = field(repr=False, default=None)
    optimal_proportion: np.ndarray = field(repr=False, default=None)
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    CSV_COLUMNS = ("scenario_id", "test", "hypothesis", "alpha", "rate", "stderr", "mean_final_regret")

    def row(self) -> dict:
        return {c: getattr(self, c) for c in self.CSV_COLUMNS}

    def to_dict(self) -> dict:
        out = self.row()
        out.update(M=self.M, calibrated=self.calibrated, runtime=self.runtime, details=self.details)
        if self.regret_curve is not None:
            out["regret_curve"] = self.regret_curve.tolist()
        if self.optimal_proportion is not None:
            out["optimal_proportion"] = self.optimal_proportion.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def reports_to_csv(reports, path=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MetricsReport.CSV_COLUMNS)
    for r in reports:
        writer.writerow([_fmt(v) for v in r.row().values()])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _fmt(value):
    return repr(float(value)) if isinstance(value, (float, np.floating)) else value


def rate_with_stderr(reject_prob: np.ndarray) -> tuple[float, float]:
    p = float(np.mean(reject_prob))
    return p, math.sqrt(p * (1.0 - p) / len(reject_prob))


# --- error-rate estimation --------------------------------------------------

def compute_statistics(test: TestKind, batch: HistoryBatch, config: ScenarioConfig) -> np.ndarray:
    test = TestKind(test)
    if test is TestKind.AP:
        return apt.ap_statistics(batch.alloc_prob, config.ap_threshold)
    if config.num_arms != 2:
        raise InapplicableTestError(f"{test.value} is implemented for two arms")
    if test is TestKind.BOLS:
        return cmp.bols_statistics(batch.assignments, batch.rewards, config.delta_null)
    return cmp.aw_aipw_statistics(batch.alloc_prob, batch.assignments, batch.rewards, config.delta_null)


def check_applicable(test: TestKind, config: ScenarioConfig) -> None:
    if TestKind(test) is TestKind.BOLS and config.schedule.n < 3:
        raise InapplicableTestError(f"BOLS inapplicable: batch size {config.schedule.n} < 3")


def continuous_critical(test: TestKind, config: ScenarioConfig, alpha: float) -> float:
    if TestKind(test) is TestKind.BOLS:
        stream = derive_stream(config.master_seed, 0, StreamPurpose.CRITICAL_VALUE)
        return cmp.bols_critical(config.schedule.n, config.schedule.T, alpha, BOLS_CRITICAL_DRAWS, stream)
    return cmp.aw_aipw_critical(alpha)


def null_statistics(test: TestKind, config: ScenarioConfig, M: int | None = None,
                    workers: int | None = None) -> np.ndarray:
    """Statistics from the dedicated H0 calibration run (its own substreams)."""
    null = config.null_config()
    batch = simulate(null, M, purpose=StreamPurpose.CALIBRATION, workers=workers)
    return compute_statistics(test, batch, null)


def reject_probabilities(test: TestKind, stats: np.ndarray, config: ScenarioConfig, calibrate: bool,
                         null_stats: np.ndarray | None = None) -> tuple[np.ndarray, dict]:
    """Per-trajectory rejection probability (expected over the decision randomization)."""
    test = TestKind(test)
    alpha = config.alpha
    if alpha == 0 and calibrate:
        return np.zeros(len(stats)), {"critical_value": math.inf, "gamma": 0.0}
    if test is TestKind.AP:
        dist = apt.NullDistribution.from_statistics(null_stats, config.schedule.T)
        if calibrate:
            q_lo, q_hi, a_lo, a_hi = apt.randomization_bracket(dist, alpha)
            gamma = cal.discrete_gamma(alpha, a_lo, a_hi)
            info = {"critical_value": q_hi, "gamma": gamma, "exceedance_lo": a_lo, "exceedance_hi": a_hi}
            return cal.discrete_reject_prob(stats, q_hi, gamma), info
        q_star, exc = apt.critical_value(dist, alpha)
        return (stats > q_star).astype(float), {"critical_value": q_star, "null_exceedance": exc}
    crit = continuous_critical(test, config, alpha)
    hit = np.nan_to_num(stats, nan=-np.inf) >= crit
    info = {"critical_value": crit, "undefined_fraction": float(np.isnan(stats).mean())}
    if not calibrate:
        return hit.astype(float), info
    alpha_bar = float(np.mean(np.nan_to_num(null_stats, nan=-np.inf) >= crit))
    gamma, conservative = cal.continuous_gamma(alpha_bar, alpha)
    info.update(alpha_bar=alpha_bar, gamma=gamma, conservative=conservative)
    return hit * gamma, info


def estimate_error_rates(config: ScenarioConfig, test: TestKind | str, calibrate: bool = False,
                         workers: int | None = None) -> MetricsReport:
    """Type-I error (H0 scenario) or power (H1 scenario) of one test.

    Rates are expected rejection probabilities: boundary trajectories of a
    randomized test count with weight ``gamma`` instead of a coin flip.
    """
    test = TestKind(test)
    if config.trajectories < 100:
        raise ConfigError("error-rate estimation needs at least 100 trajectories")
    check_applicable(test, config)
    started = time.perf_counter()
    batch = simulate(config, workers=workers)
    stats = compute_statistics(test, batch, config)
    needs_null = test is TestKind.AP or calibrate
    null_stats = null_statistics(test, config, workers=workers) if needs_null else None
    probs, info = reject_probabilities(test, stats, config, calibrate, null_stats)
    rate, stderr = rate_with_stderr(probs)
    regrets = regret_curves(batch.assignments, config.regime)
    return MetricsReport(
        scenario_id=config.scenario_id,
        test=test.value,
        hypothesis=config.hypothesis.value,
        alpha=config.alpha,
        rate=rate,
        stderr=stderr,
        M=len(batch),
        calibrated=calibrate,
        mean_final_regret=float(regrets[:, -1].mean()),
        regret_curve=regrets.mean(axis=0),
        optimal_proportion=optimal_arm_proportion(batch.assignments, config.regime),
        runtime=time.perf_counter() - started,
        details=info,
    )


@dataclass(frozen=True)
class MultiArmRates:
    """Family-level rates of the per-comparison AP-tests at the Sidak level."""

    scenario_id: str
    hypothesis: str
    alpha: float
    sidak_alpha: float
    conjunctive_rate: float
    fwer: float
    global_ap_rate: float
    M: int


def multiarm_error_rates(config: ScenarioConfig, calibrate: bool = True,
                         workers: int | None = None) -> MultiArmRates:
    """Conjunctive rejection and family-wise error of pairwise AP-tests.

    Each comparison of the experimental arm against one control counts the
    steps where the posterior probability that the experimental arm is
    better exceeds 0.5. Comparisons are tested at the Sidak level using the
    pooled pairwise null distribution from a separate all-equal run; the
    boundary randomizations are independent across comparisons.
    """
    K = config.num_arms - 1
    if K < 2:
        raise ConfigError("multi-arm rates need at least three arms")
    T = config.schedule.T
    level = apt.sidak_level(config.alpha, K)
    batch = simulate(config, workers=workers)
    null_batch = simulate(config.null_config(), purpose=StreamPurpose.CALIBRATION, workers=workers)
    pair_stats = np.count_nonzero(batch.pairwise[:, 1:] > 0.5, axis=1)  # (M, K)
    null_pair = np.count_nonzero(null_batch.pairwise[:, 1:] > 0.5, axis=1).ravel()
    dist = apt.NullDistribution.from_statistics(null_pair, T)
    if calibrate:
        _, q_hi, a_lo, a_hi = apt.randomization_bracket(dist, level)
        probs = cal.discrete_reject_prob(pair_stats, q_hi, cal.discrete_gamma(level, a_lo, a_hi))
    else:
        q_star, _ = apt.critical_value(dist, level)
        probs = (pair_stats > q_star).astype(float)
    conj = float(np.prod(probs, axis=1).mean())
    fwer = float((1.0 - np.prod(1.0 - probs, axis=1)).mean())

    thr = config.ap_threshold
    glob = apt.ap_statistics(batch.alloc_prob, thr)
    gdist = apt.NullDistribution.from_statistics(apt.ap_statistics(null_batch.alloc_prob, thr), T)
    if calibrate:
        _, q_hi, a_lo, a_hi = apt.randomization_bracket(gdist, config.alpha)
        gprob = cal.discrete_reject_prob(glob, q_hi, cal.discrete_gamma(config.alpha, a_lo, a_hi))
    else:
        gprob = (glob > apt.critical_value(gdist, config.alpha)[0]).astype(float)
    return MultiArmRates(config.scenario_id, config.hypothesis.value, config.alpha, level,
                         conj, fwer, float(gprob.mean()), len(batch))


def apply_test(history: TrialHistory, test: TestKind | str, alpha: float, *, calibrate: bool = False,
               null_dist: apt.NullDistribution | None = None, null_stats: np.ndarray | None = None,
               seed: int = 0, delta_null: float = 0.0) -> TestOutcome:
    """Test one history.

    AP needs ``null_dist``; calibrated comparator tests need ``null_stats``
    from an H0 run. For the comparators both exceedance fields hold the
    estimated H0 rejection rate of the unrandomized region (``alpha``
    itself when uncalibrated). Decision randomization draws from the
    DECISION substream of ``seed``.
    """
    test = TestKind(test)
    decision = derive_stream(seed, 0, StreamPurpose.DECISION)
    if test is TestKind.AP:
        if null_dist is None:
            raise ValueError("the AP-test needs a null distribution")
        stat = apt.ap_statistic(history)
        if calibrate:
            q_lo, q_hi, a_lo, a_hi = apt.randomization_bracket(null_dist, alpha)
            reject, gamma = cal.randomized_reject_discrete(stat, q_lo, q_hi, a_lo, a_hi, alpha, decision)
            return TestOutcome(stat, q_hi, alpha, a_lo, a_hi, gamma, reject, test.value)
        q_star, above = apt.critical_value(null_dist, alpha)
        reject = stat > q_star
        return TestOutcome(stat, q_star, alpha, null_dist.exceed(q_star - 1), above,
                           1.0 if reject else 0.0, reject, test.value)
    if test is TestKind.BOLS:
        stat = cmp.bols_statistic(history, delta_null)
        stream = derive_stream(seed, 0, StreamPurpose.CRITICAL_VALUE)
        crit = cmp.bols_critical(history.n, history.T, alpha, BOLS_CRITICAL_DRAWS, stream) if alpha > 0 else math.inf
    else:
        stat = cmp.aw_aipw_statistic(history, delta_null)
        crit = cmp.aw_aipw_critical(alpha) if alpha > 0 else math.inf
    if calibrate:
        if null_stats is None:
            raise ValueError("calibration needs H0 statistics")
        alpha_bar = float(np.mean(np.nan_to_num(null_stats, nan=-np.inf) >= crit))
        reject, gamma = cal.randomized_reject_continuous(stat, crit, alpha_bar, alpha, decision)
        return TestOutcome(stat, crit, alpha, alpha_bar, alpha_bar, gamma, reject, test.value)
    reject = bool(stat >= crit)
    return TestOutcome(stat, crit, alpha, alpha, alpha, 1.0 if reject else 0.0, reject, test.value)


# --- fixtures ----------------------------------------------------------------

MTURK_N1, MTURK_N0 = 137, 13
MTURK_MEAN1, MTURK_MEAN0 = 5.2, 4.6


def mturk_summary_history(prior: GaussianPrior = GaussianPrior(0.0, 10.0), sigma2_y: float = 4.0) -> TrialHistory:
    """Deterministic synthetic history matching the published field-study summaries.

    150 participants in batches of 3 (T = 49), 137 on the experimental arm
    with mean reward 5.2 and 13 on the control with mean 4.6. Allocation
    probabilities are the TS probabilities implied by the running data.
    """
    schedule = BatchSchedule(49, 3)
    steps, n = schedule.steps, schedule.n
    arms = np.ones((steps, n), dtype=np.int8)
    control_steps = np.round(np.linspace(0, steps - 1, MTURK_N0)).astype(int)
    arms[control_steps, 0] = 0
    rewards = np.empty((steps, n))
    for arm, count, mean in ((1, MTURK_N1, MTURK_MEAN1), (0, MTURK_N0, MTURK_MEAN0)):
        offsets = np.resize([-1.0, 0.0, 1.0], count)
        offsets -= offsets.mean()
        rewards[arms == arm] = mean + offsets
    n1 = np.cumsum((arms == 1).sum(axis=1))
    s1 = np.cumsum(np.where(arms == 1, rewards, 0.0).sum(axis=1))
    n0 = np.cumsum((arms == 0).sum(axis=1))
    s0 = np.cumsum(np.where(arms == 0, rewards, 0.0).sum(axis=1))
    before = lambda a: np.concatenate([[0.0], a[:-1]])
    alloc = ts_alloc_prob_arrays(before(n1), before(s1), before(n0), before(s0), prior, sigma2_y)
    return TrialHistory(schedule, alloc, arms, rewards, PolicyTag.STANDARD_TS)
