"""Allocation-probability testing for Thompson-Sampling experiments."""

from .ap_test import (NullDistribution, ap_statistic, critical_value, exact_null_pmf, exact_top_mass,
                      mc_null_distribution, sidak_level)
from .calibration import randomized_reject_continuous, randomized_reject_discrete
from .comparators import aw_aipw_statistic, bols_critical, bols_statistic
from .core import (BatchSchedule, ConfigError, DegenerateVarianceError, GaussianPrior, InapplicableTestError,
                   PolicyTag, PosteriorState, RandomStream, RewardParams, StreamPurpose, TestOutcome,
                   TrialHistory, derive_stream)
from .harness import (Hypothesis, MetricsReport, ScenarioConfig, TestKind, estimate_error_rates, regret_curve,
                      run_trajectory, simulate)
from .policy import ClippingScheme, clip, mc_alloc_probs, posterior_params, select_arm, ts_alloc_prob
from .rewards import RegimeVariant, RewardRegime, draw_reward, mean_at

__version__ = "0.1.0"
