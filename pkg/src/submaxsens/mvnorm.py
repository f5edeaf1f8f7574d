"""Equicoordinate multivariate normal probabilities and critical values.

``equicoordinate_prob(kappa, rho)`` estimates ``Pr(max_k X_k < kappa)`` for
``X ~ N(0, rho)`` and ``critical_value(rho, alpha)`` solves
``Pr(max_k X_k < kappa) = 1 - alpha``.

The integral is computed by Genz's separation of variables on a pivoted
Cholesky factor, integrated over independently scrambled Sobol' point
sets whose spread gives the standard error. Singular
correlation matrices, which arise whenever comparisons are linear
combinations of one another, are integrated in their rank: rows without a
pivot of their own turn into extra (upper or lower) limits on the last
variable they load on.

Two interchangeable kernels evaluate the integrand: a compiled one
(``_mvn_core``) and a numpy fallback (``_mvn_py``). The compiled kernel is
used when importable unless ``SUBMAXSENS_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import functools
import logging
import os
import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from . import _mvn_py
from .errors import NumericalError

logger = logging.getLogger(__name__)

try:
    from . import _mvn_core
except ImportError:  # pragma: no cover - depends on build
    _mvn_core = None

KERNELS = {"python": _mvn_py}
if _mvn_core is not None:
    KERNELS["cython"] = _mvn_core

_kernel = KERNELS["python"] if os.environ.get("SUBMAXSENS_PURE_PYTHON") or _mvn_core is None else _mvn_core


def backend() -> str:
    """Name of the kernel in use (``"cython"`` or ``"python"``)."""
    return "cython" if _kernel is _mvn_core else "python"


def set_backend(name: str) -> None:
    global _kernel
    try:
        _kernel = KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {sorted(KERNELS)}") from None
    _kappa_cache.clear()


EIG_CLIP = 1e-10
NEG_EIG_TOL = -1e-8
_N_SHIFTS = 8
_N0 = 128


class MvnAccuracyWarning(UserWarning):
    """``max_samples`` was reached before the requested standard error."""


@dataclass(frozen=True)
class MvnSettings:
    target_se: float = 5e-4
    max_samples: int = 1 << 20
    seed: int = 20240101

    def __post_init__(self):
        if not self.target_se > 0:
            raise ValueError("target_se must be positive")
        if self.max_samples < 1024:
            raise ValueError("max_samples must be at least 1024")


DEFAULT_MVN = MvnSettings()


@dataclass(frozen=True)
class SovFactor:
    """Constraint form of ``rho`` for the separation-of-variables integrand.

    Row ``j`` (sorted by ``lead``) states
    ``sum_{m < lead[j]} coef[j, m] z_m +/- z_{lead[j]} <= kappa * scale[j]``
    with ``+`` when ``upper[j]`` is set, for independent standard normals
    ``z_0..z_{rank-1}``.
    """

    rank: int
    lead: np.ndarray
    coef: np.ndarray
    scale: np.ndarray
    upper: np.ndarray

    @property
    def dim(self) -> int:
        return self.rank - 1


def validate_correlation(rho) -> np.ndarray:
    rho = np.array(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise NumericalError(f"correlation matrix must be square and nonempty, got shape {rho.shape}")
    K = rho.shape[0]
    if K > 25:
        raise NumericalError(f"K={K} exceeds the supported dimension 25")
    if not np.all(np.isfinite(rho)):
        raise NumericalError("correlation matrix has non-finite entries")
    if not np.allclose(rho, rho.T, rtol=0, atol=1e-10):
        raise NumericalError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(rho), 1.0, rtol=0, atol=1e-8):
        raise NumericalError("correlation matrix diagonal is not 1")
    return 0.5 * (rho + rho.T)


def _clip(rho):
    """Zero eigenvalues below ``EIG_CLIP`` and restore the unit diagonal."""
    lam, V = np.linalg.eigh(rho)
    if lam[0] < NEG_EIG_TOL:
        raise NumericalError(f"correlation matrix is not positive semidefinite (eigenvalue {lam[0]:.3g})")
    if lam[0] >= EIG_CLIP:
        return rho
    lam = np.where(lam < EIG_CLIP, 0.0, lam)
    R = (V * lam) @ V.T
    sd = np.sqrt(np.diag(R))
    R = R / np.outer(sd, sd)
    np.fill_diagonal(R, 1.0)
    return R


def sov_factor(rho) -> SovFactor:
    """Pivoted Cholesky of a validated correlation matrix, in constraint form."""
    R = _clip(validate_correlation(rho))
    K = R.shape[0]
    Lf = np.zeros((K, K))
    resid = np.diag(R).copy()
    order = list(range(K))
    lead = np.full(K, -1, dtype=np.intp)
    r = 0
    for i in range(K):
        rest = order[i:]
        p = max(rest, key=lambda j: resid[j])
        if resid[p] <= EIG_CLIP:
            break
        order.remove(p)
        order.insert(i, p)
        piv = np.sqrt(resid[p])
        Lf[p, i] = piv
        lead[p] = i
        for j in order[i + 1 :]:
            Lf[j, i] = (R[j, p] - Lf[j, :i] @ Lf[p, :i]) / piv
            resid[j] -= Lf[j, i] ** 2
        r += 1
    Lf = Lf[:, :r]
    for j in range(K):
        if lead[j] < 0:
            nz = np.flatnonzero(np.abs(Lf[j]) > 1e-8)
            lead[j] = nz[-1]
    rows = np.argsort(lead, kind="stable")
    lead = lead[rows]
    Lf = Lf[rows]
    piv = Lf[np.arange(K), lead]
    scale = 1.0 / np.abs(piv)
    coef = Lf * scale[:, None]
    mask = np.arange(r)[None, :] >= lead[:, None]
    coef[mask] = 0.0
    upper = (piv > 0).astype(np.int8)
    return SovFactor(r, lead, np.ascontiguousarray(coef), scale, upper)


@functools.lru_cache(maxsize=64)
def _points(seed: int, dim: int, n: int) -> np.ndarray:
    """``_N_SHIFTS`` independently scrambled Sobol' sets of ``n`` points, shape (shifts, n, dim)."""
    if dim == 0:
        pts = np.zeros((1, 1, 0))
    else:
        streams = np.random.SeedSequence(seed).spawn(_N_SHIFTS)
        pts = np.stack([qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(ss)).random(n) for ss in streams])
    pts.setflags(write=False)
    return pts


def _size_points(factor, kappa, settings):
    """Smallest point set meeting ``target_se`` at ``kappa``.

    Returns ``(points, p, se, converged)``.
    """
    if factor.dim == 0:
        pts = _points(0, 0, 1)
        m = _kernel.shift_means(kappa, factor.lead, factor.coef, factor.scale, factor.upper, factor.rank, pts)
        return pts, float(m[0]), 0.0, True
    n = _N0
    while True:
        pts = _points(settings.seed, factor.dim, n)
        m = _kernel.shift_means(kappa, factor.lead, factor.coef, factor.scale, factor.upper, factor.rank, pts)
        se = float(m.std(ddof=1) / np.sqrt(len(m)))
        if se <= settings.target_se:
            return pts, float(m.mean()), se, True
        if 2 * n * len(m) > settings.max_samples:
            return pts, float(m.mean()), se, False
        n *= 2


def equicoordinate_prob(kappa: float, rho, settings: MvnSettings = DEFAULT_MVN) -> tuple[float, float]:
    """Estimate ``Pr(X_k < kappa for all k)`` for ``X ~ N(0, rho)``.

    Parameters
    ----------
    kappa : float
        Common upper limit.
    rho : (K, K) array_like
        Correlation matrix, ``K <= 25``.
    settings : MvnSettings
        Accuracy target, sample cap and seed. Results are deterministic
        given the seed.

    Returns
    -------
    p, se : float
        Estimate and its standard error over the scrambled point sets.
    """
    factor = sov_factor(rho)
    if not np.isfinite(kappa):
        return (1.0 if kappa > 0 else 0.0), 0.0
    _, p, se, ok = _size_points(factor, float(kappa), settings)
    if not ok:
        warnings.warn(f"standard error {se:.2g} above target {settings.target_se:.2g}", MvnAccuracyWarning, stacklevel=2)
    return min(max(p, 0.0), 1.0), se


def critical_value_bracket(K: int, alpha: float) -> tuple[float, float]:
    """Perfect-correlation and Bonferroni limits for the critical value."""
    return float(ndtri(1 - alpha)), float(ndtri(1 - alpha / K))


_kappa_cache: "OrderedDict[tuple, float]" = OrderedDict()
_cache_lock = threading.Lock()
_CACHE_SIZE = 512


def critical_value(rho, alpha: float = 0.05, settings: MvnSettings = DEFAULT_MVN, ftol: float = 1e-4) -> float:
    """Solve ``Pr(max_k X_k < kappa) = 1 - alpha`` for ``X ~ N(0, rho)``.

    The point-set size is fixed at the lower end of the bracket and then held
    constant, so the estimated probability is a deterministic, smooth
    function of ``kappa`` during the root search (Illinois regula falsi on
    ``[Phi^-1(1-alpha), Phi^-1(1-alpha/K)]``).

    Raises
    ------
    NumericalError
        If ``rho`` is invalid or the bracket does not straddle ``1 - alpha``.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    rho = np.ascontiguousarray(rho, dtype=float)
    key = (rho.shape, rho.tobytes(), float(alpha), settings, float(ftol), backend())
    with _cache_lock:
        if key in _kappa_cache:
            _kappa_cache.move_to_end(key)
            return _kappa_cache[key]
    kappa = _solve(rho, alpha, settings, ftol)
    with _cache_lock:
        _kappa_cache[key] = kappa
        if len(_kappa_cache) > _CACHE_SIZE:
            _kappa_cache.popitem(last=False)
    return kappa


def _solve(rho, alpha, settings, ftol):
    factor = sov_factor(rho)
    K = rho.shape[0]
    lo, hi = critical_value_bracket(K, alpha)
    if K == 1 or hi - lo < 1e-12:
        return lo
    pts, p_lo, se, ok = _size_points(factor, lo, settings)
    if not ok:
        warnings.warn(f"standard error {se:.2g} above target {settings.target_se:.2g}", MvnAccuracyWarning, stacklevel=3)
    kappa, p, evals, status = _kernel.solve(
        1.0 - alpha, lo, hi, ftol, 100,
        factor.lead, factor.coef, factor.scale, factor.upper, factor.rank, pts, p_lo,
    )
    if status == 1:
        raise NumericalError(f"critical value bracket [{lo:.4f}, {hi:.4f}] does not straddle {1 - alpha}")
    if status == 2:
        raise NumericalError("critical value iteration did not converge")
    logger.debug("kappa=%.5f p=%.6f evals=%d n=%d", kappa, p, evals, pts.shape[0] * pts.shape[1])
    return float(kappa)


def max_normal_quantile_mc(rho, alpha: float, draws: int = 10_000_000, seed: int = 0, chunk: int = 1_000_000) -> float:
    """Brute-force ``1 - alpha`` quantile of ``max_k X_k`` by direct sampling.

    Independent of the quasi-Monte Carlo integrator; used as a cross-check.
    """
    rho = np.asarray(rho, dtype=float)
    lam, V = np.linalg.eigh(rho)
    A = V * np.sqrt(np.clip(lam, 0, None))
    rng = np.random.default_rng(seed)
    maxima = np.empty(draws)
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        maxima[done : done + m] = (rng.standard_normal((m, len(lam))) @ A.T).max(axis=1)
        done += m
    return float(np.quantile(maxima, 1 - alpha))
