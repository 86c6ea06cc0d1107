import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ndtr

from aptest.ap_test import (NullDistribution, ap_statistic, ap_statistics, critical_value, exact_null_distribution,
                            exact_null_pmf, exact_top_mass, gaussian_region_probability, mc_null_distribution,
                            randomization_bracket, sidak_level)
from aptest.core import BatchSchedule, GaussianPrior, RewardParams, TrialHistory
from aptest.harness import ScenarioConfig, estimate_error_rates, simulate
from aptest.policy import ClippingScheme
from aptest.rewards import RewardRegime


def history(probs, n=1):
    probs = np.asarray(probs, dtype=float)
    steps = probs.size
    return TrialHistory(BatchSchedule(steps - 1, n), probs, np.zeros((steps, n), int), np.zeros((steps, n)))


def scenario(T, n=3, mu=(0.0, 0.5), s2y=10.0, prior_var=10.0, hypothesis="H0", **kw):
    return ScenarioConfig(BatchSchedule(T, n), RewardRegime.stationary(mu[0], mu[1], s2y),
                          GaussianPrior(0.0, prior_var), hypothesis=hypothesis, **kw)


def two_step_pmf(mu0, mu1, s2y, s2p):
    """AP pmf for T = 2, n = 1, prior mean 0, derived by hand.

    Step 0 picks an arm with probability 1/2. Given the first reward ``y0``
    the step-1 probability is known in closed form; the step-2 event
    ``pi_2 > 1/2`` is a half-line in the second reward, integrated with the
    normal cdf. The first reward is integrated numerically.
    """
    mus = (mu0, mu1)

    def post(count, total):
        prec = 1.0 / s2p + count / s2y
        return (total / s2y) / prec, 1.0 / prec

    def diff_sd(c1, s1, c0, s0):
        m1, v1 = post(c1, s1)
        m0, v0 = post(c0, s0)
        return m1 - m0, math.sqrt(v1 + v0)

    def second(c, s, arm2):
        # P(pi_2 > 1/2) for second draw on arm2 given first-step counts/sums per arm
        cc, ss = list(c), list(s)
        cc[arm2] += 1
        # diff is linear in y1: slope * y1 + intercept
        m_at0, _ = diff_sd(cc[1], ss[1], cc[0], ss[0])
        ss[arm2] += 1.0
        slope = diff_sd(cc[1], ss[1], cc[0], ss[0])[0] - m_at0
        # P(slope * Y + m_at0 > 0), Y ~ N(mus[arm2], s2y)
        z = (-m_at0 / slope - mus[arm2]) / math.sqrt(s2y)
        return float(ndtr(-z)) if slope > 0 else float(ndtr(z))

    pmf = np.zeros(3)
    for arm0 in (0, 1):
        def integrand(y0, k):
            c, s = [0, 0], [0.0, 0.0]
            c[arm0], s[arm0] = 1, y0
            diff, sd = diff_sd(c[1], s[1], c[0], s[0])
            p1 = float(ndtr(diff / sd))
            first_up = diff > 0
            up2 = p1 * second(c, s, 1) + (1 - p1) * second(c, s, 0)
            count_first = int(first_up)
            dens = math.exp(-0.5 * (y0 - mus[arm0]) ** 2 / s2y) / math.sqrt(2 * math.pi * s2y)
            if k == count_first:
                return dens * (1 - up2)
            if k == count_first + 1:
                return dens * up2
            return 0.0

        lim = 12 * math.sqrt(s2y)
        for k in range(3):
            val = sum(quad(integrand, a, b, args=(k,), epsabs=1e-12, epsrel=1e-12, limit=200)[0]
                      for a, b in ((mus[arm0] - lim, 0.0), (0.0, mus[arm0] + lim)))
            pmf[k] += 0.5 * val
    return pmf


class TestStatistic:
    def test_never_exceeds(self):
        assert ap_statistic(history([0.5] + [0.4] * 17)) == 0

    def test_always_exceeds(self):
        assert ap_statistic(history([0.5] + [0.7] * 17)) == 17

    def test_strict_inequality(self):
        assert ap_statistic(history([0.5, 0.5, 0.51, 0.5])) == 1

    def test_baseline_step_ignored(self):
        assert ap_statistic(history([0.99, 0.1, 0.1])) == 0

    def test_multiarm_threshold(self):
        assert ap_statistic(history([1 / 3, 0.34, 0.3, 0.5]), threshold=1 / 3) == 2

    def test_empty_history(self):
        with pytest.raises(ValueError):
            ap_statistic(history([0.5]))

    def test_vectorised_matches_scalar(self):
        rng = np.random.default_rng(0)
        traces = rng.random((40, 11))
        expected = [ap_statistic(history(row)) for row in traces]
        np.testing.assert_array_equal(ap_statistics(traces), expected)


class TestNullDistribution:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 12), min_size=1, max_size=300))
    def test_invariants(self, stats):
        dist = NullDistribution.from_statistics(stats, 12)
        assert dist.pmf.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.diff(dist.exceedance) <= 0)
        assert dist.exceedance[-1] == 0.0
        assert dist.exceed(-1) == 1.0

    def test_rejects_bad_pmf(self):
        with pytest.raises(ValueError):
            NullDistribution(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            NullDistribution(np.array([1.2, -0.2]))

    def test_csv_round_trip(self, tmp_path):
        dist = NullDistribution.from_statistics([0, 1, 1, 3, 3, 3, 2], 3)
        path = tmp_path / "null.csv"
        dist.to_csv(path)
        back = NullDistribution.from_csv(path)
        np.testing.assert_array_equal(back.pmf, dist.pmf)
        assert path.read_text().splitlines()[0] == "q,pmf,exceedance"

    def test_csv_rejects_missing_columns(self):
        with pytest.raises(ValueError):
            NullDistribution.from_csv("q,p\n0,1\n")


class TestCriticalValue:
    def test_alpha_one(self):
        dist = NullDistribution(np.array([0.2, 0.3, 0.5]))
        assert critical_value(dist, 1.0) == (0, 0.8)

    def test_top_mass_fallback(self):
        # bimodal null with top mass 0.073: the minimiser at alpha = 0.1 is T - 1
        pmf = np.zeros(18)
        pmf[0], pmf[17], pmf[16], pmf[8] = 0.073, 0.073, 0.05, 1 - 0.196
        q, exc = critical_value(NullDistribution(pmf), 0.1)
        assert q == 16
        assert exc == pytest.approx(0.073)

    def test_fallback_when_nothing_meets_level(self):
        pmf = np.zeros(18)
        pmf[0], pmf[17], pmf[8] = 0.073, 0.073, 1 - 0.146
        q, exc = critical_value(NullDistribution(pmf), 0.05)
        assert q == 16
        assert exc == pytest.approx(0.073)

    def test_definition_on_exact_two_step_pmf(self):
        params = RewardParams.two_arm(0.0, 0.0, 1.0)
        pmf = two_step_pmf(0.0, 0.0, 1.0, 1.0)
        dist = NullDistribution(pmf / pmf.sum())
        for alpha in (0.05, 0.3, 0.45, 0.9):
            q, _ = critical_value(dist, alpha)
            brute = min(q for q in range(3) if pmf[q + 1:].sum() <= alpha)
            assert q == (brute if brute < 2 else 1)
        np.testing.assert_allclose(exact_null_pmf(params, GaussianPrior(0.0, 1.0), 2), pmf, atol=1e-6)

    def test_bracket(self):
        dist = NullDistribution(np.array([0.2, 0.3, 0.5]))
        q_lo, q_hi, a_lo, a_hi = randomization_bracket(dist, 0.3)
        assert a_lo > 0.3 >= a_hi and q_hi == q_lo + 1
        assert randomization_bracket(dist, 0.0)[1] == 2

    def test_invalid_alpha(self):
        dist = NullDistribution(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            critical_value(dist, 0.0)


class TestSidak:
    def test_single_comparison(self):
        assert sidak_level(0.05, 1) == pytest.approx(0.05)

    def test_two_comparisons(self):
        assert sidak_level(0.05, 2) == pytest.approx(1 - 0.95**0.5)
        assert sidak_level(0.05, 2) == pytest.approx(0.02532, abs=1e-5)

    def test_zero_level(self):
        assert sidak_level(0.0, 5) == 0.0


class TestExact:
    def test_one_step_null_is_half(self):
        for s2y in (0.5, 1.0, 10.0):
            params = RewardParams.two_arm(0.3, 0.3, s2y)
            assert exact_top_mass(params, GaussianPrior(0.0, 1.0), 1) == pytest.approx(0.5, abs=1e-6)

    def test_one_step_alternative(self):
        expected = 0.5 * (ndtr(0.5) + 1 - ndtr(0.0))
        value = exact_top_mass(RewardParams.two_arm(0.0, 0.5, 1.0), GaussianPrior(0.0, 1.0), 1)
        assert value == pytest.approx(expected, abs=1e-6)
        assert value == pytest.approx(0.596, abs=1e-3)

    def test_three_eighths(self):
        assert gaussian_region_probability([[1.0], [1.0, 1.0]]) == pytest.approx(3 / 8, abs=1e-6)

    @pytest.mark.parametrize("mu", [(0.0, 0.0), (0.0, 0.5), (1.0, -0.3)])
    def test_two_steps_against_hand_derivation(self, mu):
        params = RewardParams.two_arm(mu[0], mu[1], 2.0)
        got = exact_null_pmf(params, GaussianPrior(0.0, 3.0), 2)
        np.testing.assert_allclose(got, two_step_pmf(mu[0], mu[1], 2.0, 3.0), atol=1e-6)

    @pytest.mark.parametrize("T", [1, 2, 3])
    def test_methods_agree(self, T):
        params = RewardParams.two_arm(0.0, 0.5, 1.0)
        prior = GaussianPrior(0.0, 1.0)
        a = exact_null_pmf(params, prior, T, method="adaptive")
        b = exact_null_pmf(params, prior, T, method="gauss")
        np.testing.assert_allclose(a, b, atol=1e-5)

    def test_null_pmf_symmetric(self):
        pmf = exact_null_distribution(RewardParams.two_arm(0.0, 0.0, 1.0), GaussianPrior(0.0, 1.0), 4).pmf
        np.testing.assert_allclose(pmf, pmf[::-1], atol=1e-6)
        assert pmf.sum() == pytest.approx(1.0)

    def test_budget(self):
        with pytest.raises(ValueError):
            exact_null_pmf(RewardParams.two_arm(0.0, 0.0, 1.0), GaussianPrior(), 5)
        with pytest.raises(ValueError):
            exact_null_pmf(RewardParams((0.0, 0.0, 0.0), 1.0), GaussianPrior(), 2)


class TestMonteCarloNull:
    @pytest.mark.parametrize("T", [1, 2])
    def test_matches_exact(self, T):
        M = 40_000
        config = scenario(T, n=1, mu=(0.0, 0.0), s2y=1.0, prior_var=1.0, master_seed=7)
        mc = mc_null_distribution(config, M).pmf[T]
        exact = exact_top_mass(RewardParams.two_arm(0.0, 0.0, 1.0), GaussianPrior(0.0, 1.0), T)
        assert abs(mc - exact) < 4 * math.sqrt(exact * (1 - exact) / M)

    def test_one_step_half(self):
        M = 10_000
        dist = mc_null_distribution(scenario(1, n=1, master_seed=3), M)
        assert abs(dist.pmf[1] - 0.5) < 3 / math.sqrt(M)

    def test_symmetry(self):
        M = 10_000
        pmf = mc_null_distribution(scenario(17, master_seed=11), M).pmf
        se = np.sqrt(2 * pmf * (1 - pmf) / M) + 1e-12
        assert np.all(np.abs(pmf - pmf[::-1]) < 4 * se + 1e-9)

    def test_reproducible(self):
        config = scenario(10, master_seed=4)
        a = mc_null_distribution(config, 500)
        b = mc_null_distribution(config, 500)
        np.testing.assert_array_equal(a.pmf, b.pmf)

    def test_rejects_alternative_and_small_m(self):
        with pytest.raises(ValueError):
            mc_null_distribution(scenario(5, hypothesis="H1"), 1000)
        with pytest.raises(ValueError):
            mc_null_distribution(scenario(5), 99)

    def test_top_mass_decreases_with_horizon(self):
        tops = [mc_null_distribution(scenario(T, master_seed=1), 10_000).pmf[-1] for T in (5, 10, 17, 50)]
        assert all(a >= b for a, b in zip(tops, tops[1:]))

    def test_divergence_under_alternative(self):
        medians = []
        for T in (10, 25, 50, 150):
            h1 = ap_statistics(simulate(scenario(T, hypothesis="H1"), 1000, seed=2).alloc_prob)
            h0 = ap_statistics(simulate(scenario(T), 1000, seed=3).alloc_prob)
            assert 0.3 * T <= np.median(h0) <= 0.7 * T
            medians.append(np.median(h1))
        assert all(a < b for a, b in zip(medians, medians[1:]))

    def test_clipping_robustness(self):
        rates = []
        for threshold in (0.0, 0.05, 0.1):
            config = scenario(50, hypothesis="H1", trajectories=10_000, master_seed=5,
                              clipping=ClippingScheme.symmetric(threshold))
            rates.append(estimate_error_rates(config, "ap").rate)
        assert max(rates) - min(rates) < 0.03
