import math

import numpy as np
import pytest

from aptest.ap_test import NullDistribution, randomization_bracket
from aptest.calibration import (ConservativeTestWarning, continuous_gamma, discrete_gamma, discrete_reject_prob,
                                randomized_reject_continuous, randomized_reject_discrete)
from aptest.core import BatchSchedule, GaussianPrior, PolicyTag, StreamPurpose, derive_stream
from aptest.harness import ScenarioConfig, estimate_error_rates
from aptest.rewards import RewardRegime

# a bimodal discrete law on {0, ..., 6} standing in for an AP null
PMF = np.array([0.08, 0.12, 0.15, 0.3, 0.15, 0.12, 0.08])


def fig2_config(**kw):
    return ScenarioConfig(BatchSchedule(17, 3), RewardRegime.stationary(0.0, 0.5, 10.0), GaussianPrior(0.0, 10.0),
                          **kw)


class TestDiscrete:
    def test_reference_gamma(self):
        assert discrete_gamma(0.05, 0.073, 0.0) == pytest.approx(0.05 / 0.073)
        assert discrete_gamma(0.05, 0.073, 0.0) == pytest.approx(0.685, abs=1e-3)

    def test_boundaries(self):
        assert discrete_gamma(0.05, 0.05, 0.01) == 1.0
        assert discrete_gamma(0.05, 0.2, 0.05) == 0.0

    def test_ordering(self):
        with pytest.raises(ValueError):
            discrete_gamma(0.05, 0.04, 0.0)
        with pytest.raises(ValueError):
            randomized_reject_discrete(3, 1, 3, 0.2, 0.0, 0.05, derive_stream(0, 0))

    def test_decision_regions(self):
        s = derive_stream(1, 0, StreamPurpose.DECISION)
        assert randomized_reject_discrete(6, 4, 5, 0.2, 0.0, 0.05, s) == (True, 1.0)
        assert randomized_reject_discrete(4, 4, 5, 0.2, 0.0, 0.05, s) == (False, 0.0)
        hits = [randomized_reject_discrete(5, 4, 5, 0.2, 0.0, 0.05, s) for _ in range(20_000)]
        assert {g for _, g in hits} == {0.25}
        assert abs(np.mean([r for r, _ in hits]) - 0.25) < 4 * math.sqrt(0.25 * 0.75 / 20_000)

    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
    def test_exact_size(self, alpha):
        M = 100_000
        dist = NullDistribution(PMF)
        q_lo, q_hi, a_lo, a_hi = randomization_bracket(dist, alpha)
        rng = np.random.default_rng(3)
        stats = rng.choice(PMF.size, size=M, p=PMF)
        s = derive_stream(2, 0, StreamPurpose.DECISION)
        rejects = [randomized_reject_discrete(int(x), q_lo, q_hi, a_lo, a_hi, alpha, s)[0] for x in stats]
        assert abs(np.mean(rejects) - alpha) < 3 * math.sqrt(alpha * (1 - alpha) / M)

    def test_power_accounting_matches_direct_draws(self):
        dist = NullDistribution(PMF)
        q_lo, q_hi, a_lo, a_hi = randomization_bracket(dist, 0.05)
        gamma = discrete_gamma(0.05, a_lo, a_hi)
        alt = np.array([0.02, 0.03, 0.05, 0.1, 0.2, 0.25, 0.35])
        M = 100_000
        stats = np.random.default_rng(4).choice(alt.size, size=M, p=alt)
        accounted = discrete_reject_prob(stats, q_hi, gamma).mean()
        assert accounted == pytest.approx(alt[q_hi + 1:].sum() + gamma * alt[q_hi], abs=5 / math.sqrt(M))
        s = derive_stream(5, 0, StreamPurpose.DECISION)
        direct = np.mean([randomized_reject_discrete(int(x), q_lo, q_hi, a_lo, a_hi, 0.05, s)[0] for x in stats])
        assert abs(direct - accounted) < 4 * math.sqrt(accounted * (1 - accounted) / M)


class TestContinuous:
    def test_halving(self):
        assert continuous_gamma(0.1, 0.05) == (0.5, False)

    def test_already_exact(self):
        assert continuous_gamma(0.05, 0.05) == (1.0, False)

    def test_conservative_pass_through(self):
        assert continuous_gamma(0.03, 0.05) == (1.0, True)
        with pytest.warns(ConservativeTestWarning):
            assert randomized_reject_continuous(3.0, 1.0, 0.03, 0.05, derive_stream(0, 0)) == (True, 1.0)

    def test_zero_level(self):
        assert continuous_gamma(0.1, 0.0) == (0.0, False)
        assert randomized_reject_continuous(9.0, 1.0, 0.1, 0.0, derive_stream(0, 0))[0] is False

    def test_below_boundary(self):
        assert randomized_reject_continuous(0.5, 1.0, 0.1, 0.05, derive_stream(0, 0)) == (False, 0.0)
        assert randomized_reject_continuous(float("nan"), 1.0, 0.1, 0.05, derive_stream(0, 0)) == (False, 0.0)

    def test_exact_size(self):
        # N(0, 1) statistic against a boundary with true size 0.1
        M = 100_000
        t_star = 1.2815515655446004
        stats = np.random.default_rng(7).standard_normal(M)
        s = derive_stream(6, 0, StreamPurpose.DECISION)
        rejects = [randomized_reject_continuous(x, t_star, 0.1, 0.05, s)[0] for x in stats]
        assert abs(np.mean(rejects) - 0.05) < 3 * math.sqrt(0.05 * 0.95 / M)


class TestHarnessCalibration:
    def test_aw_aipw_calibrated_size(self):
        config = fig2_config(policy=PolicyTag.RESTRICTED_TS_AWAIPW, hypothesis="H0", master_seed=17)
        report = estimate_error_rates(config, "awaipw", calibrate=True)
        assert report.details["alpha_bar"] > 0.05
        assert abs(report.rate - 0.05) < 0.005

    def test_ap_calibrated_size(self):
        report = estimate_error_rates(fig2_config(hypothesis="H0", master_seed=18), "ap", calibrate=True)
        assert abs(report.rate - 0.05) < 3 * math.sqrt(2 * 0.05 * 0.95 / 10_000)

    def test_power_monotone_in_alpha(self):
        rates = [estimate_error_rates(fig2_config(alpha=a, master_seed=19, trajectories=4000), "ap",
                                      calibrate=True).rate for a in (0.01, 0.05, 0.1)]
        assert rates[0] <= rates[1] <= rates[2]

    def test_zero_alpha(self):
        report = estimate_error_rates(fig2_config(alpha=0.0, trajectories=500), "ap", calibrate=True)
        assert report.rate == 0.0
