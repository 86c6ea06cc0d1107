"""BOLS and AW-AIPW Z-statistics for two-arm adaptive experiments.

Both statistics use steps ``t = 1..T``; step 0 only feeds the plug-in
means of AW-AIPW. The ``*_statistics`` functions work on stacked histories of
shape (M, T+1, n) and return one statistic per trajectory, with NaN where
the statistic is undefined.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .core import DegenerateVarianceError, InapplicableTestError, PolicyTag, RandomStream, TrialHistory


@dataclass(frozen=True)
class BolsBatchStat:
    """Per-batch OLS treatment difference and residual variance."""

    delta_hat: float
    n0: int
    n1: int
    sigma2_hat: float

    def term(self, delta_null: float = 0.0) -> float:
        if self.sigma2_hat == 0:
            raise DegenerateVarianceError("zero residual variance in a BOLS batch")
        n = self.n0 + self.n1
        return float(np.sqrt(self.n0 * self.n1) * (self.delta_hat - delta_null) / np.sqrt(n * self.sigma2_hat))


def _check_tag(history: TrialHistory, expected: PolicyTag, test: str) -> None:
    if history.policy_tag is not expected:
        warnings.warn(f"{test} applied to a {history.policy_tag.value} history "
                      f"(expected {expected.value})", stacklevel=3)


def bols_batch_stats(history: TrialHistory) -> list[BolsBatchStat]:
    n = history.n
    if n < 3:
        raise InapplicableTestError(f"BOLS inapplicable: batch size {n} < 3")
    stats = []
    for t in range(1, history.T + 1):
        arms = history.assignments[t]
        y = history.rewards[t]
        n1 = int(np.count_nonzero(arms == 1))
        n0 = n - n1
        if n0 == 0 or n1 == 0:
            raise InapplicableTestError(f"BOLS inapplicable: batch {t} is missing an arm")
        m1 = y[arms == 1].mean()
        m0 = y[arms == 0].mean()
        resid = y - np.where(arms == 1, m1, m0)
        stats.append(BolsBatchStat(float(m1 - m0), n0, n1, float(resid @ resid / (n - 2))))
    return stats


def bols_statistic(history: TrialHistory, delta_null: float = 0.0) -> float:
    """Sum over batches of the studentized per-batch OLS differences."""
    _check_tag(history, PolicyTag.RESTRICTED_TS_BOLS, "BOLS")
    return float(sum(b.term(delta_null) for b in bols_batch_stats(history)))


def bols_statistics(assignments: np.ndarray, rewards: np.ndarray, delta_null: float = 0.0) -> np.ndarray:
    """Vectorised BOLS over (M, T+1, n) arrays; NaN for trajectories where it is undefined."""
    a = np.asarray(assignments)[:, 1:] == 1
    y = np.asarray(rewards, dtype=float)[:, 1:]
    n = a.shape[-1]
    if n < 3:
        raise InapplicableTestError(f"BOLS inapplicable: batch size {n} < 3")
    n1 = a.sum(-1)
    n0 = n - n1
    with np.errstate(invalid="ignore", divide="ignore"):
        m1 = np.where(a, y, 0.0).sum(-1) / n1
        m0 = np.where(a, 0.0, y).sum(-1) / n0
        resid = y - np.where(a, m1[..., None], m0[..., None])
        s2 = (resid * resid).sum(-1) / (n - 2)
        terms = np.sqrt(n0 * n1) * (m1 - m0 - delta_null) / np.sqrt(n * s2)
    bad = (n0 == 0) | (n1 == 0) | (s2 == 0)
    terms[bad] = np.nan
    return terms.sum(-1)


def bols_critical(n: int, T: int, alpha: float, M: int, stream: RandomStream) -> float:
    """Monte Carlo ``1 - alpha`` quantile of a sum of ``T`` iid Student-t(n-2) draws."""
    if n < 3:
        raise InapplicableTestError(f"BOLS inapplicable: batch size {n} < 3")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    sums = np.zeros(M)
    chunk = max(1, 2_000_000 // max(T, 1))
    for start in range(0, M, chunk):
        stop = min(M, start + chunk)
        sums[start:stop] = stream.generator.standard_t(n - 2, (stop - start, T)).sum(axis=1)
    return float(np.quantile(sums, 1.0 - alpha))


def _aw_aipw_core(alloc, arms, y, delta_null, outcome_model):
    """Shared AW-AIPW computation over (M, T+1) probabilities and (M, T+1, n) data."""
    if outcome_model not in ("sample_mean", "zero"):
        raise ValueError(f"unknown outcome model {outcome_model!r}")
    est, var = [], []
    for k in (0, 1):
        pk = alloc if k == 1 else 1.0 - alloc
        on_arm = arms == k
        if outcome_model == "zero":
            m_hat = np.zeros(alloc.shape)
        else:
            # plug-in mean of arm k over steps strictly before t (0 with no data yet)
            cnt = np.cumsum(on_arm.sum(-1), axis=1)
            tot = np.cumsum(np.where(on_arm, y, 0.0).sum(-1), axis=1)
            m_hat = np.zeros(alloc.shape)
            with np.errstate(invalid="ignore", divide="ignore"):
                m_hat[:, 1:] = np.where(cnt[:, :-1] > 0, tot[:, :-1] / cnt[:, :-1], 0.0)
        p = pk[:, 1:, None]
        ind = on_arm[:, 1:]
        score = ind * y[:, 1:] / p + (1.0 - ind / p) * m_hat[:, 1:, None]
        h = np.broadcast_to(np.sqrt(p), score.shape)
        h_sum = h.sum(axis=(1, 2))
        mu = (h * score).sum(axis=(1, 2)) / h_sum
        dev = score - mu[:, None, None]
        var.append((h * h * dev * dev).sum(axis=(1, 2)) / h_sum**2)
        est.append(mu)
    denom = np.sqrt(var[0] + var[1])
    return est[1] - est[0] - delta_null, denom


def aw_aipw_statistic(history: TrialHistory, delta_null: float = 0.0, outcome_model: str = "sample_mean") -> float:
    """Adaptively weighted AIPW Z-statistic for ``mu_1 - mu_0 = delta_null``.

    ``outcome_model="zero"`` drops the augmentation term, giving the
    adaptively weighted IPW estimator.
    """
    _check_tag(history, PolicyTag.RESTRICTED_TS_AWAIPW, "AW-AIPW")
    alloc = np.asarray(history.alloc_prob)
    if alloc.size < 2:
        raise ValueError("history has no post-baseline steps")
    if np.any((alloc <= 0) | (alloc >= 1)):
        raise ValueError("AW-AIPW needs allocation probabilities strictly inside (0, 1)")
    num, denom = _aw_aipw_core(alloc[None], np.asarray(history.assignments)[None],
                               np.asarray(history.rewards, dtype=float)[None], delta_null, outcome_model)
    if denom[0] == 0:
        if num[0] == 0:
            return 0.0
        raise DegenerateVarianceError("AW-AIPW variance estimate is zero")
    return float(num[0] / denom[0])


def aw_aipw_statistics(alloc_probs, assignments, rewards, delta_null: float = 0.0,
                       outcome_model: str = "sample_mean") -> np.ndarray:
    """Vectorised AW-AIPW statistic; NaN where the variance estimate is zero."""
    num, denom = _aw_aipw_core(np.asarray(alloc_probs, dtype=float), np.asarray(assignments),
                               np.asarray(rewards, dtype=float), delta_null, outcome_model)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = num / denom
    z[(denom == 0) & (num == 0)] = 0.0
    z[(denom == 0) & (num != 0)] = np.nan
    return z


def aw_aipw_critical(alpha: float) -> float:
    """One-sided standard-normal critical value."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(ndtri(1.0 - alpha))
