# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the equicoordinate normal integral.

Same signatures and results as ``_mvn_py``. Work buffers are allocated once
per call and the integrand is evaluated in fixed-size blocks of points.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, fabs, INFINITY
from scipy.special.cython_special cimport ndtri

cnp.import_array()

cdef double _UMIN = 2.2250738585072014e-308
cdef double _UMAX = 1.0 - 1.1102230246251565e-16
cdef double _RSQRT2 = 0.7071067811865476


cdef inline double _phi(double x) noexcept nogil:
    if x == INFINITY:
        return 1.0
    if x == -INFINITY:
        return 0.0
    return 0.5 * erfc(-x * _RSQRT2)


cdef enum:
    BLOCK = 64


cdef inline double _quantile(double pa, double y, double e) noexcept nogil:
    cdef double u = pa + y * e
    if u < _UMIN:
        u = _UMIN
    elif u > _UMAX:
        u = _UMAX
    return ndtri(u)


cdef double _mean(double kappa, const cnp.intp_t[::1] lead, const double[:, ::1] coef,
                  const double[::1] scale, const signed char[::1] upper, int r,
                  const double[:, :, ::1] points, double[::1] out, double[:, ::1] z,
                  double[::1] f) noexcept nogil:
    # Points are processed in blocks, one variable at a time across the block,
    # so that the special-function calls of different points are independent
    # and can overlap in the pipeline.
    cdef Py_ssize_t nshift = points.shape[0]
    cdef Py_ssize_t n = points.shape[1]
    cdef Py_ssize_t K = lead.shape[0]
    cdef Py_ssize_t s, k, k0, kb, i, j, jj, j0, jend, m
    cdef double pa0, e0, lo, hi, b, pa, e, acc, total = 0.0
    # the first variable's limits do not depend on the sample point
    lo = -INFINITY
    hi = INFINITY
    j0 = 0
    while j0 < K and lead[j0] == 0:
        b = kappa * scale[j0]
        if upper[j0]:
            if b < hi:
                hi = b
        elif -b > lo:
            lo = -b
        j0 += 1
    pa0 = _phi(lo)
    e0 = _phi(hi) - pa0
    if e0 <= 0.0:
        for s in range(nshift):
            out[s] = 0.0
        return 0.0
    for s in range(nshift):
        acc = 0.0
        k0 = 0
        while k0 < n:
            kb = min(<Py_ssize_t>BLOCK, n - k0)
            for k in range(kb):
                f[k] = e0
                if r > 1:
                    z[k, 0] = _quantile(pa0, points[s, k0 + k, 0], e0)
            j = j0
            for i in range(1, r):
                jend = j
                while jend < K and lead[jend] == i:
                    jend += 1
                for k in range(kb):
                    if f[k] == 0.0:
                        continue
                    lo = -INFINITY
                    hi = INFINITY
                    for jj in range(j, jend):
                        b = kappa * scale[jj]
                        for m in range(i):
                            b -= coef[jj, m] * z[k, m]
                        if upper[jj]:
                            if b < hi:
                                hi = b
                        elif -b > lo:
                            lo = -b
                    pa = _phi(lo)
                    e = _phi(hi) - pa
                    if e <= 0.0:
                        f[k] = 0.0
                        continue
                    f[k] *= e
                    if i < r - 1:
                        z[k, i] = _quantile(pa, points[s, k0 + k, i], e)
                j = jend
            for k in range(kb):
                acc += f[k]
            k0 += BLOCK
        out[s] = acc / n
        total += out[s]
    return total / nshift


def shift_means(double kappa, lead, coef, scale, upper, int r, points):
    """Mean of the integrand over each randomization of ``points`` (nshift, n, r-1)."""
    cdef const double[:, :, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    out = np.empty(pts.shape[0])
    _mean(kappa, np.ascontiguousarray(lead, dtype=np.intp), np.ascontiguousarray(coef, dtype=np.float64),
          np.ascontiguousarray(scale, dtype=np.float64), np.ascontiguousarray(upper, dtype=np.int8), r,
          pts, out, np.zeros((BLOCK, max(r, 1))), np.zeros(BLOCK))
    return out


def solve(double target, double kappa_lo, double kappa_hi, double ftol, int maxiter,
          lead_, coef_, scale_, upper_, int r, points_, double p_lo=float("nan")):
    """Illinois iteration for ``p(kappa) = target`` on a fixed point set.

    ``p_lo``, when given, is the already computed value at ``kappa_lo``.
    Returns ``(kappa, p, evaluations, status)`` with status 0 on success,
    1 if the bracket does not straddle the target, 2 on iteration limit.
    """
    cdef const cnp.intp_t[::1] lead = np.ascontiguousarray(lead_, dtype=np.intp)
    cdef const double[:, ::1] coef = np.ascontiguousarray(coef_, dtype=np.float64)
    cdef const double[::1] scale = np.ascontiguousarray(scale_, dtype=np.float64)
    cdef const signed char[::1] upper = np.ascontiguousarray(upper_, dtype=np.int8)
    cdef const double[:, :, ::1] points = np.ascontiguousarray(points_, dtype=np.float64)
    cdef double[::1] out = np.empty(points.shape[0])
    cdef double[:, ::1] z = np.zeros((BLOCK, max(r, 1)))
    cdef double[::1] f = np.zeros(BLOCK)
    cdef double a = kappa_lo, b = kappa_hi, c, fa, fb, fc
    cdef int evals, it

    evals = 0
    if p_lo == p_lo:
        fa = p_lo - target
    else:
        with nogil:
            fa = _mean(a, lead, coef, scale, upper, r, points, out, z, f) - target
        evals = 1
    if fabs(fa) <= ftol:
        return a, fa + target, evals, 0
    with nogil:
        fb = _mean(b, lead, coef, scale, upper, r, points, out, z, f) - target
    evals += 1
    if fabs(fb) <= ftol:
        return b, fb + target, evals, 0
    if fa > 0 or fb < 0:
        return float("nan"), float("nan"), evals, 1
    for it in range(maxiter):
        c = b - fb * (b - a) / (fb - fa)
        with nogil:
            fc = _mean(c, lead, coef, scale, upper, r, points, out, z, f) - target
        evals += 1
        if fabs(fc) <= ftol or fabs(b - a) < 1e-12:
            return c, fc + target, evals, 0
        if (fc > 0) != (fb > 0):
            a = b
            fa = fb
        else:
            fa *= 0.5
        b = c
        fb = fc
    return b, fb + target, evals, 2
