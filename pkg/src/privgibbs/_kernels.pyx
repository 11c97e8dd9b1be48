# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled record-sweep kernels for Laplace-noised record-additive mechanisms.

Mirrors ``_kernels_py`` operation for operation; both must produce
bit-identical results on identical inputs.
"""
import numpy as np

from libc.math cimport exp, fabs, sqrt
from libc.stdint cimport int64_t


def laplace_dense_sweep(const double[::1] s_dp, double[::1] total, double scale,
                        double[:, ::1] current, const double[:, ::1] proposed,
                        const double[::1] log_u, const int64_t[::1] order,
                        unsigned char[::1] accepted, double[::1] acc_prob):
    cdef Py_ssize_t d = total.shape[0]
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t r, i, j
    cdef Py_ssize_t n_acc = 0
    cdef double delta, tn
    cdef double[::1] cand = np.empty(d)
    for r in range(n):
        i = order[r]
        delta = 0.0
        for j in range(d):
            tn = total[j] - current[i, j] + proposed[i, j]
            cand[j] = tn
            delta += fabs(s_dp[j] - total[j]) - fabs(s_dp[j] - tn)
        delta = delta / scale
        acc_prob[i] = 1.0 if delta >= 0.0 else exp(delta)
        if log_u[r] < delta:
            accepted[i] = 1
            n_acc += 1
            for j in range(d):
                total[j] = cand[j]
                current[i, j] = proposed[i, j]
        else:
            accepted[i] = 0
    return n_acc


def laplace_cells_sweep(const double[::1] s_dp, double[::1] total, double scale,
                        int64_t[:, ::1] current, const int64_t[:, ::1] proposed,
                        const double[::1] log_u, const int64_t[::1] order,
                        unsigned char[::1] accepted, double[::1] acc_prob):
    cdef Py_ssize_t c = current.shape[1]
    cdef Py_ssize_t n = order.shape[0]
    cdef Py_ssize_t r, i, k
    cdef Py_ssize_t n_acc = 0
    cdef int64_t o, w
    cdef double delta
    for r in range(n):
        i = order[r]
        delta = 0.0
        for k in range(c):
            o = current[i, k]
            w = proposed[i, k]
            if o != w:
                delta += fabs(s_dp[o] - total[o]) - fabs(s_dp[o] - (total[o] - 1.0))
                delta += fabs(s_dp[w] - total[w]) - fabs(s_dp[w] - (total[w] + 1.0))
        delta = delta / scale
        acc_prob[i] = 1.0 if delta >= 0.0 else exp(delta)
        if log_u[r] < delta:
            accepted[i] = 1
            n_acc += 1
            for k in range(c):
                o = current[i, k]
                w = proposed[i, k]
                if o != w:
                    total[o] = total[o] - 1.0
                    total[w] = total[w] + 1.0
                    current[i, k] = w
        else:
            accepted[i] = 0
    return n_acc


def regression_contributions(const double[:, ::1] records, const double[::1] lower,
                             const double[::1] upper, double[:, ::1] out):
    """Clamp, normalize and expand each (x_1..x_p, y) row into its released moments."""
    cdef Py_ssize_t n = records.shape[0]
    cdef Py_ssize_t w = records.shape[1]
    cdef Py_ssize_t p = w - 1
    cdef Py_ssize_t i, j, a, b, col
    cdef double z, yt
    cdef double[::1] xt = np.empty(w)
    for i in range(n):
        xt[0] = 1.0
        for j in range(w):
            z = records[i, j]
            if z < lower[j]:
                z = lower[j]
            if z > upper[j]:
                z = upper[j]
            z = 2.0 * (z - lower[j]) / (upper[j] - lower[j]) - 1.0
            if j < p:
                xt[j + 1] = z
            else:
                yt = z
        col = 0
        for j in range(w):
            out[i, col] = xt[j] * yt
            col += 1
        out[i, col] = yt * yt
        col += 1
        for a in range(w):
            for b in range(a, w):
                if a == 0 and b == 0:
                    continue
                out[i, col] = xt[a] * xt[b]
                col += 1


def regression_propose(const double[:, ::1] z, const double[::1] mean,
                       const double[:, ::1] chol, const double[::1] beta, double sigma,
                       double[:, ::1] out):
    """Rows ``x0 = mean + chol z[:p]`` and ``y = (1, x0) . beta + sigma z[p]``."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t p = z.shape[1] - 1
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(p):
            acc = mean[j]
            for k in range(j + 1):
                acc = acc + chol[j, k] * z[i, k]
            out[i, j] = acc
        acc = beta[0]
        for j in range(p):
            acc = acc + out[i, j] * beta[j + 1]
        out[i, p] = acc + sigma * z[i, p]


def regression_gram(const double[:, ::1] records, double[:, ::1] xtx, double[::1] xty):
    """Accumulate x'x and x'y for the design with an intercept column."""
    cdef Py_ssize_t n = records.shape[0]
    cdef Py_ssize_t q = records.shape[1]
    cdef Py_ssize_t p = q - 1
    cdef Py_ssize_t i, a, b
    cdef double y, xa
    for a in range(q):
        xty[a] = 0.0
        for b in range(q):
            xtx[a, b] = 0.0
    for i in range(n):
        y = records[i, p]
        for a in range(q):
            xa = 1.0 if a == 0 else records[i, a - 1]
            xty[a] = xty[a] + xa * y
            for b in range(a, q):
                xtx[a, b] = xtx[a, b] + xa * (1.0 if b == 0 else records[i, b - 1])
    for a in range(q):
        for b in range(a):
            xtx[a, b] = xtx[b, a]


def normal_precision_draw(double[:, ::1] precision, double[::1] shift, const double[::1] z,
                          double[::1] out):
    """Draw from N(P^-1 shift, P^-1). Overwrites ``precision`` with its Cholesky
    factor and ``shift`` with the mean. Returns False if P is not positive definite."""
    cdef Py_ssize_t q = precision.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for j in range(q):
        acc = precision[j, j]
        for k in range(j):
            acc = acc - precision[j, k] * precision[j, k]
        if not acc > 0.0:
            return False
        precision[j, j] = sqrt(acc)
        for i in range(j + 1, q):
            acc = precision[i, j]
            for k in range(j):
                acc = acc - precision[i, k] * precision[j, k]
            precision[i, j] = acc / precision[j, j]
    # L w = shift, then L' mu = w
    for i in range(q):
        acc = shift[i]
        for k in range(i):
            acc = acc - precision[i, k] * shift[k]
        shift[i] = acc / precision[i, i]
    for i in range(q - 1, -1, -1):
        acc = shift[i]
        for k in range(i + 1, q):
            acc = acc - precision[k, i] * shift[k]
        shift[i] = acc / precision[i, i]
    # L' v = z gives v with covariance P^-1
    for i in range(q - 1, -1, -1):
        acc = z[i]
        for k in range(i + 1, q):
            acc = acc - precision[k, i] * out[k]
        out[i] = acc / precision[i, i]
    for i in range(q):
        out[i] = shift[i] + out[i]
    return True
