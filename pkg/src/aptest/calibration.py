"""Randomized decision rules that hit a target type-I error exactly.

Discrete statistics randomize at the boundary support point; continuous
statistics whose rejection region is too large under H0 thin their
rejections by a constant factor. The ``*_gamma`` helpers return the
rejection probability without drawing, which is what the harness uses
for expected-rejection accounting.
"""

from __future__ import annotations

import warnings

import numpy as np

from .core import RandomStream


class ConservativeTestWarning(UserWarning):
    """A continuous test already rejects less often than alpha; it is left unchanged."""


def discrete_gamma(alpha: float, alpha_lo_exceed: float, alpha_hi_exceed: float) -> float:
    """Boundary rejection probability ``(alpha - a_hi) / (a_lo - a_hi)``."""
    if not alpha_hi_exceed <= alpha <= alpha_lo_exceed:
        raise ValueError(f"need alpha_hi_exceed <= alpha <= alpha_lo_exceed, got "
                         f"{alpha_hi_exceed} <= {alpha} <= {alpha_lo_exceed}")
    if alpha_lo_exceed == alpha_hi_exceed:
        return 1.0
    return (alpha - alpha_hi_exceed) / (alpha_lo_exceed - alpha_hi_exceed)


def discrete_reject_prob(stats, q_hi: int, gamma: float) -> np.ndarray:
    """Per-trajectory rejection probability: 1 above ``q_hi``, ``gamma`` at it, 0 below."""
    stats = np.asarray(stats)
    return np.where(stats > q_hi, 1.0, np.where(stats == q_hi, gamma, 0.0))


def randomized_reject_discrete(stat: int, q_lo: int, q_hi: int, alpha_lo_exceed: float,
                               alpha_hi_exceed: float, alpha: float,
                               stream: RandomStream) -> tuple[bool, float]:
    if q_hi != q_lo + 1:
        raise ValueError(f"q_lo={q_lo} and q_hi={q_hi} are not adjacent support points")
    gamma = discrete_gamma(alpha, alpha_lo_exceed, alpha_hi_exceed)
    if stat > q_hi:
        return True, 1.0
    if stat < q_hi:
        return False, 0.0
    return bool(stream.random() < gamma), gamma


def continuous_gamma(alpha_bar: float, alpha: float) -> tuple[float, bool]:
    """Thinning factor ``alpha / alpha_bar`` and whether the test was conservative.

    A conservative test (``alpha_bar < alpha``) keeps factor 1.
    """
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0 <= alpha_bar <= 1:
        raise ValueError(f"alpha_bar must lie in [0, 1], got {alpha_bar}")
    if alpha == 0:
        return 0.0, False
    if alpha_bar < alpha:
        return 1.0, True
    return alpha / alpha_bar, False


def randomized_reject_continuous(stat: float, t_star: float, alpha_bar: float, alpha: float,
                                 stream: RandomStream) -> tuple[bool, float]:
    gamma, conservative = continuous_gamma(alpha_bar, alpha)
    if conservative:
        warnings.warn(f"alpha_bar={alpha_bar} < alpha={alpha}: decision left unrandomized",
                      ConservativeTestWarning, stacklevel=2)
    if not stat >= t_star:
        return False, 0.0
    if gamma == 1.0:
        return True, 1.0
    return bool(stream.random() < gamma), gamma
