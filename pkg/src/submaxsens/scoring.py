"""Per-pair scores for the three test statistics.

Every statistic is a signed sum ``sum_i s_i * q_i`` with ``s_i = sign(d_i)``
and a nonnegative magnitude ``q_i``:

* ``mean_difference``: ``q = |d|``.
* ``m_statistic``: ``q = psi(|d| / h0)`` with ``h0`` the median ``|d|`` over
  all pairs pooled.
* ``group_m_statistic``: ``q = psi(|d| / h_g) * h_g`` with ``h_g`` the median
  ``|d|`` inside the pair's own group, so trimming happens group by group
  while the groups keep their relative score sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GroupedStudy
from .errors import DegenerateScale, EmptyGroup

MEAN_DIFFERENCE = "mean_difference"
M_STATISTIC = "m_statistic"
GROUP_M_STATISTIC = "group_m_statistic"
METHODS = (MEAN_DIFFERENCE, M_STATISTIC, GROUP_M_STATISTIC)

_ALIASES = {
    "mean-difference": MEAN_DIFFERENCE,
    "mean": MEAN_DIFFERENCE,
    "md": MEAN_DIFFERENCE,
    "m": M_STATISTIC,
    "m-statistic": M_STATISTIC,
    "group-m": GROUP_M_STATISTIC,
    "group-m-statistic": GROUP_M_STATISTIC,
    "gm": GROUP_M_STATISTIC,
}


def canonical_method(name: str) -> str:
    """Map a user-facing method name (``group-m``, ``m``, ...) to its canonical form."""
    key = name.strip().lower()
    if key in METHODS:
        return key
    try:
        return _ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown score method {name!r}; choose from {', '.join(METHODS)}") from None


@dataclass(frozen=True)
class PsiParams:
    """Trimming function parameters: inner cut ``a`` and trim level ``t``."""

    inner: float = 0.0
    trim: float = 3.0

    def __post_init__(self):
        if not (0 <= self.inner < self.trim):
            raise ValueError(f"need 0 <= inner < trim, got inner={self.inner}, trim={self.trim}")


DEFAULT_PSI = PsiParams()


@dataclass(frozen=True)
class ScoreSet:
    """Scores for every pair of a study, in input order.

    ``q`` and ``s`` are parallel arrays; ``scale_factors[g]`` is the scale
    used for group ``g`` (pooled ``h0`` repeated, ``h_g``, or 1.0).
    """

    method: str
    q: np.ndarray
    s: np.ndarray
    group: np.ndarray
    scale_factors: np.ndarray

    @property
    def contributions(self) -> np.ndarray:
        return self.s * self.q

    def on_data_scale(self) -> np.ndarray:
        """Signed scores in response units (``m_statistic`` is multiplied back by ``h0``)."""
        if self.method == M_STATISTIC:
            return self.contributions * self.scale_factors[self.group]
        return self.contributions


def psi(d, params: PsiParams = DEFAULT_PSI):
    """Trimming function on nonnegative arguments.

    Returns 0 below ``inner``, the identity on ``[inner, trim]`` and ``trim``
    above. Works elementwise on arrays.
    """
    d = np.asarray(d, dtype=float)
    out = np.minimum(d, params.trim)
    if params.inner > 0:
        out = np.where(d < params.inner, 0.0, out)
    return out if out.ndim else float(out)


def abs_median(values) -> float:
    """Median of absolute values (midpoint of the two central values for even counts)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("abs_median of an empty sequence")
    return float(np.median(np.abs(values)))


def _signs(d):
    return np.sign(d).astype(np.int8)


def score_mean_difference(study: GroupedStudy) -> ScoreSet:
    d = study.d
    return ScoreSet(MEAN_DIFFERENCE, np.abs(d), _signs(d), study.group, np.ones(study.G))


def score_m_statistic(study: GroupedStudy, params: PsiParams = DEFAULT_PSI) -> ScoreSet:
    """Conventional M-scores, scaled by the pooled median ``|d|``.

    Raises
    ------
    DegenerateScale
        If the pooled median is zero.
    """
    d = study.d
    h0 = abs_median(d)
    if h0 <= 0:
        raise DegenerateScale()
    q = np.asarray(psi(np.abs(d) / h0, params))
    s = _signs(d)
    s[q == 0] = 0
    return ScoreSet(M_STATISTIC, q, s, study.group, np.full(study.G, h0))


def score_group_m_statistic(study: GroupedStudy, params: PsiParams = DEFAULT_PSI) -> ScoreSet:
    """Group M-scores: trim within each group at its own median, then rescale.

    Raises
    ------
    EmptyGroup
        If any group has no pairs.
    DegenerateScale
        If a group's median ``|d|`` is zero; ``exc.group`` names it.
    """
    d = study.d
    absd = np.abs(d)
    scales = np.empty(study.G)
    for g in range(study.G):
        idx = study.members(g)
        if idx.size == 0:
            raise EmptyGroup(g)
        scales[g] = abs_median(d[idx])
        if scales[g] <= 0:
            raise DegenerateScale(g)
    h = scales[study.group]
    q = np.asarray(psi(absd / h, params)) * h
    s = _signs(d)
    s[q == 0] = 0
    return ScoreSet(GROUP_M_STATISTIC, q, s, study.group, scales)


def score(study: GroupedStudy, method: str, params: PsiParams = DEFAULT_PSI) -> ScoreSet:
    """Dispatch to the scoring rule named by ``method``."""
    method = canonical_method(method)
    if method == MEAN_DIFFERENCE:
        return score_mean_difference(study)
    if method == M_STATISTIC:
        return score_m_statistic(study, params)
    return score_group_m_statistic(study, params)
