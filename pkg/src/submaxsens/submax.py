"""The submax joint test over the overall comparison and 2L covariate halves.

With ``L`` binary covariates there are ``K = 2L + 1`` comparisons: all
pairs, then ``cov_l = 1`` and ``cov_l = 0`` for each covariate. Comparison
``k`` sums the group statistics it selects, and the maximum of the ``K``
standardized deviates is referred to the equicoordinate normal critical
value of their correlation matrix.

For matched pairs the worst-case variances at ``Gamma`` are a common factor
times their ``Gamma = 1`` values, so the correlation matrix, and with it the
critical value, is the same at every ``Gamma``. :class:`SubmaxAnalysis`
exploits this: it scores the data and solves for the critical value once,
then evaluates any number of ``Gamma`` values.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import mvnorm
from .data import GroupedStudy
from .errors import DegenerateVariance, DroppedComparisonWarning, SmallGroupWarning
from .mvnorm import DEFAULT_MVN, MvnSettings
from .scoring import DEFAULT_PSI, PsiParams, ScoreSet, canonical_method, score
from .sensitivity import GammaBounds, group_sums, mean_factor, variance_factor

SMALL_GROUP = 30


@dataclass(frozen=True)
class ComparisonMatrix:
    C: np.ndarray
    labels: tuple[str, ...]

    @property
    def K(self) -> int:
        return self.C.shape[0]

    def subset(self, keep) -> "ComparisonMatrix":
        keep = np.asarray(keep, dtype=bool)
        return ComparisonMatrix(self.C[keep], tuple(l for l, k in zip(self.labels, keep) if k))


def build_comparisons(L: int, names=None) -> ComparisonMatrix:
    """Overall row, then ``cov_l=1`` / ``cov_l=0`` rows, over canonically ordered groups.

    ``names`` optionally replaces ``cov_1, ..., cov_L`` in the labels.
    """
    if L < 0:
        raise ValueError("L must be >= 0")
    G = 1 << L
    names = list(names) if names is not None else [f"cov_{l}" for l in range(1, L + 1)]
    # bit of covariate l in group g's pattern (group 0 is all ones)
    value = (G - 1) - np.arange(G)
    rows = [np.ones(G, dtype=np.int8)]
    labels = ["All"]
    for l in range(L):
        bit = ((value >> (L - 1 - l)) & 1).astype(np.int8)
        rows += [bit, 1 - bit]
        labels += [f"{names[l]}=1", f"{names[l]}=0"]
    return ComparisonMatrix(np.array(rows, dtype=np.int8), tuple(labels))


def joint_moments(C: ComparisonMatrix, bounds: GammaBounds):
    """Comparison statistics, their worst-case means and covariance.

    Returns ``(S, theta, Sigma)`` with ``S = C T``, ``theta = C mu`` and
    ``Sigma = C diag(nu) C^T``.

    Raises
    ------
    DegenerateVariance
        If some comparison has zero variance.
    """
    M = C.C.astype(float)
    S = M @ bounds.t_obs
    theta = M @ bounds.mu
    Sigma = (M * bounds.nu) @ M.T
    zero = np.flatnonzero(~(np.diag(Sigma) > 0))
    if zero.size:
        raise DegenerateVariance(C.labels[zero[0]])
    return S, theta, Sigma


def correlation(Sigma) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    d = np.diag(Sigma)
    if not np.all(d > 0):
        raise DegenerateVariance()
    sd = np.sqrt(d)
    rho = Sigma / np.outer(sd, sd)
    np.fill_diagonal(rho, 1.0)
    return rho


@dataclass(frozen=True)
class SubmaxResult:
    gamma: float
    alpha: float
    method: str
    labels: tuple[str, ...]
    deviates: np.ndarray
    rho: np.ndarray
    kappa: float
    d_max: float
    argmax: str
    reject: bool

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "alpha": self.alpha,
            "method": self.method,
            "labels": list(self.labels),
            "deviates": [float(x) for x in self.deviates],
            "rho": [[float(x) for x in row] for row in self.rho],
            "kappa": self.kappa,
            "d_max": self.d_max,
            "argmax": self.argmax,
            "reject": self.reject,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class SubmaxAnalysis:
    """Scores, comparisons and critical value for one study and score method.

    Parameters
    ----------
    study : GroupedStudy
    method : str
        ``mean_difference``, ``m_statistic`` or ``group_m_statistic`` (or a
        CLI alias such as ``group-m``).
    psi : PsiParams
    alpha : float
        One-sided level of the joint test.
    settings : MvnSettings
        Accuracy and seed for the critical value.

    Comparisons that select only empty groups are dropped with a
    :class:`DroppedComparisonWarning`.
    """

    def __init__(self, study: GroupedStudy, method: str, psi: PsiParams = DEFAULT_PSI,
                 alpha: float = 0.05, settings: MvnSettings = DEFAULT_MVN, names=None):
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {alpha}")
        self.study = study
        self.method = canonical_method(method)
        self.psi = psi
        self.alpha = float(alpha)
        self.settings = settings
        self.scores: ScoreSet = score(study, self.method, psi)

        comparisons = build_comparisons(study.L, names)
        sizes = study.sizes
        populated = (comparisons.C @ sizes) > 0
        if not populated.all():
            dropped = [l for l, k in zip(comparisons.labels, populated) if not k]
            warnings.warn(f"dropping comparisons with no pairs: {', '.join(dropped)}", DroppedComparisonWarning, stacklevel=2)
            comparisons = comparisons.subset(populated)
        self.comparisons = comparisons
        small = [study.group_labels[g] for g in range(study.G) if 0 < sizes[g] < SMALL_GROUP]
        if small:
            warnings.warn(f"groups with fewer than {SMALL_GROUP} pairs: {', '.join(small)}", SmallGroupWarning, stacklevel=2)

        self._t_obs, self._q1, self._q2 = group_sums(self.scores, study.G)
        M = comparisons.C.astype(float)
        self._S = M @ self._t_obs
        self._Q1 = M @ self._q1
        var1 = M @ self._q2
        zero = np.flatnonzero(~(var1 > 0))
        if zero.size:
            raise DegenerateVariance(comparisons.labels[zero[0]])
        self._sd1 = np.sqrt(var1)
        self.rho = correlation((M * self._q2) @ M.T)
        self._kappa = None

    @property
    def labels(self) -> tuple[str, ...]:
        return self.comparisons.labels

    @property
    def kappa(self) -> float:
        if self._kappa is None:
            self._kappa = mvnorm.critical_value(self.rho, self.alpha, self.settings)
        return self._kappa

    def bounds(self, gamma: float) -> GammaBounds:
        return GammaBounds(float(gamma), self._q1 * mean_factor(gamma), self._q2 * variance_factor(gamma), self._t_obs)

    def deviates(self, gamma: float) -> np.ndarray:
        """Standardized comparison deviates at ``gamma``."""
        return (self._S - self._Q1 * mean_factor(gamma)) / (self._sd1 * math.sqrt(variance_factor(gamma)))

    def deviates_grid(self, gammas) -> np.ndarray:
        """Deviates for many ``Gamma`` values, shape ``(len(gammas), K)``."""
        g = np.asarray(gammas, dtype=float)
        if np.any(~(g >= 1)):
            raise ValueError("gamma must be >= 1")
        mf = ((g - 1) / (g + 1))[:, None]
        vf = np.sqrt(4 * g / (1 + g) ** 2)[:, None]
        return (self._S - self._Q1 * mf) / (self._sd1 * vf)

    def test(self, gamma: float) -> SubmaxResult:
        dev = self.deviates(gamma)
        k = int(np.argmax(dev))
        d_max = float(dev[k])
        kappa = self.kappa
        return SubmaxResult(
            gamma=float(gamma), alpha=self.alpha, method=self.method, labels=self.labels,
            deviates=dev, rho=self.rho, kappa=kappa, d_max=d_max, argmax=self.labels[k],
            reject=bool(d_max > kappa),
        )


def submax_test(study: GroupedStudy, score_method: str, psi_params: PsiParams = DEFAULT_PSI,
                gamma: float = 1.0, alpha: float = 0.05, settings: MvnSettings = DEFAULT_MVN) -> SubmaxResult:
    """Joint test of no effect at sensitivity ``gamma``."""
    return SubmaxAnalysis(study, score_method, psi_params, alpha, settings).test(gamma)


def gamma_grid(gamma_max: float, step: float) -> np.ndarray:
    if not gamma_max >= 1:
        raise ValueError("gamma_max must be >= 1")
    if not step > 0:
        raise ValueError("step must be positive")
    n = int(math.floor((gamma_max - 1.0) / step + 1e-9)) + 1
    return np.round(1.0 + step * np.arange(n), 10)


@dataclass(frozen=True)
class CurvePoint:
    gamma: float
    d_max: float
    kappa: float
    reject: bool


def sensitivity_value(study: GroupedStudy, score_method: str, psi_params: PsiParams = DEFAULT_PSI,
                      alpha: float = 0.05, gamma_max: float = 10.0, step: float = 0.05,
                      settings: MvnSettings = DEFAULT_MVN):
    """Largest grid ``Gamma`` at which the joint test still rejects.

    Scans ``1, 1 + step, ..., gamma_max`` without assuming the maximum
    deviate is monotone in ``Gamma``.

    Returns
    -------
    gamma_star : float or None
        ``None`` if no grid point rejects.
    curve : list of CurvePoint
    """
    analysis = SubmaxAnalysis(study, score_method, psi_params, alpha, settings)
    return scan(analysis, gamma_grid(gamma_max, step))


def scan(analysis: SubmaxAnalysis, gammas):
    dmax = analysis.deviates_grid(gammas).max(axis=1)
    kappa = analysis.kappa
    curve = [CurvePoint(float(g), float(d), kappa, bool(d > kappa)) for g, d in zip(gammas, dmax)]
    rejected = [p.gamma for p in curve if p.reject]
    return (max(rejected) if rejected else None), curve
