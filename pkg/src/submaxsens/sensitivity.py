"""Worst-case null moments of the group statistics under the Gamma model.

For a matched pair with score magnitude ``q`` the signed contribution is
``+q`` or ``-q``. Bias of at most ``Gamma`` lets the probability of ``+q``
range over ``[1/(1+Gamma), Gamma/(1+Gamma)]``; the expectation is largest at
the upper end, giving

    mu = q (Gamma - 1) / (Gamma + 1),    nu = q**2 * 4 Gamma / (1 + Gamma)**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import GroupedStudy
from .errors import DegenerateVariance
from .scoring import ScoreSet


def _check_gamma(gamma):
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")


def mean_factor(gamma: float) -> float:
    _check_gamma(gamma)
    return (gamma - 1.0) / (gamma + 1.0)


def variance_factor(gamma: float) -> float:
    _check_gamma(gamma)
    return 4.0 * gamma / (1.0 + gamma) ** 2


def pair_bounds(q: float, gamma: float) -> tuple[float, float]:
    """Worst-case mean and the variance attained there for one pair."""
    return q * mean_factor(gamma), q * q * variance_factor(gamma)


@dataclass(frozen=True)
class GammaBounds:
    gamma: float
    mu: np.ndarray
    nu: np.ndarray
    t_obs: np.ndarray


def group_sums(scores: ScoreSet, G: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-group ``sum s*q``, ``sum q`` and ``sum q**2``; these fix the bounds at every Gamma."""
    g = scores.group
    t_obs = np.bincount(g, weights=scores.contributions, minlength=G)
    q1 = np.bincount(g, weights=scores.q, minlength=G)
    q2 = np.bincount(g, weights=scores.q * scores.q, minlength=G)
    return t_obs, q1, q2


def group_bounds(scores: ScoreSet, study: GroupedStudy, gamma: float) -> GammaBounds:
    """Observed group statistics ``T_g`` and their worst-case mean and variance."""
    t_obs, q1, q2 = group_sums(scores, study.G)
    return GammaBounds(float(gamma), q1 * mean_factor(gamma), q2 * variance_factor(gamma), t_obs)


def deviate(t_obs: float, mu: float, nu: float) -> float:
    if not nu > 0:
        raise DegenerateVariance()
    return (t_obs - mu) / math.sqrt(nu)
