"""Pure numpy kernels for the equicoordinate normal integral.

Mirrors ``_mvn_core.pyx`` function for function; used when the compiled
extension is unavailable. See ``mvnorm`` for the meaning of the arguments.
"""

import numpy as np
from scipy.special import ndtr, ndtri

_UMIN = np.finfo(float).tiny
_UMAX = 1.0 - np.finfo(float).epsneg


def _integrand(kappa, lead, coef, scale, upper, r, y):
    """Separation-of-variables integrand at points ``y`` of shape (m, r-1)."""
    m = y.shape[0]
    z = np.zeros((m, r))
    f = np.ones(m)
    K = lead.shape[0]
    j = 0
    for i in range(r):
        lo = np.full(m, -np.inf)
        hi = np.full(m, np.inf)
        while j < K and lead[j] == i:
            b = kappa * scale[j] - z[:, :i] @ coef[j, :i]
            if upper[j]:
                hi = np.minimum(hi, b)
            else:
                lo = np.maximum(lo, -b)
            j += 1
        pa = ndtr(lo)
        e = ndtr(hi) - pa
        e = np.maximum(e, 0.0)
        f *= e
        if i < r - 1:
            u = np.clip(pa + y[:, i] * e, _UMIN, _UMAX)
            z[:, i] = ndtri(u)
    return f


def shift_means(kappa, lead, coef, scale, upper, r, points):
    """Mean of the integrand over each randomization of ``points`` (nshift, n, r-1)."""
    nshift, n = points.shape[:2]
    f = _integrand(float(kappa), lead, coef, scale, upper, r, points.reshape(nshift * n, -1))
    return f.reshape(nshift, n).mean(axis=1)


def solve(target, kappa_lo, kappa_hi, ftol, maxiter, lead, coef, scale, upper, r, points, p_lo=np.nan):
    """Illinois iteration for ``p(kappa) = target`` on a fixed point set.

    ``p_lo``, when given, is the already computed value at ``kappa_lo``.
    Returns ``(kappa, p, evaluations, status)`` with status 0 on success,
    1 if the bracket does not straddle the target, 2 on iteration limit.
    """

    def f(kappa):
        return shift_means(kappa, lead, coef, scale, upper, r, points).mean() - target

    a, b = kappa_lo, kappa_hi
    if np.isnan(p_lo):
        fa = f(a)
        evals = 1
    else:
        fa = p_lo - target
        evals = 0
    if abs(fa) <= ftol:
        return a, fa + target, evals, 0
    fb = f(b)
    evals += 1
    if abs(fb) <= ftol:
        return b, fb + target, evals, 0
    if fa > 0 or fb < 0:
        return np.nan, np.nan, evals, 1
    for _ in range(maxiter):
        c = b - fb * (b - a) / (fb - fa)
        fc = f(c)
        evals += 1
        if abs(fc) <= ftol or abs(b - a) < 1e-12:
            return c, fc + target, evals, 0
        if (fc > 0) != (fb > 0):
            a, fa = b, fb
        else:
            fa *= 0.5
        b, fb = c, fc
    return b, fb + target, evals, 2
