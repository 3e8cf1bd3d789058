# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: outer-product accumulation and power iteration."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def outer_product_sum(const double[:, ::1] d):
    """Return sum_j d[j] d[j]^T, accumulated row by row in index order."""
    cdef Py_ssize_t n = d.shape[0], k = d.shape[1]
    cdef Py_ssize_t j, a, b
    cdef double da
    out = np.zeros((k, k), dtype=np.float64)
    cdef double[:, ::1] acc = out
    for j in range(n):
        for a in range(k):
            da = d[j, a]
            if da == 0.0:
                continue
            for b in range(k):
                acc[a, b] += da * d[j, b]
    return out


cdef int _power(const double[:, ::1] m, double[::1] v, double[::1] w,
                double value_tol, double resid_tol, int max_iter,
                double *value, double *resid) noexcept nogil:
    # Returns the iteration count on success and -iterations on failure.
    # Iterates with M + shift*I, shift = e'Me/n; the value and residual use M.
    cdef Py_ssize_t n = m.shape[0]
    cdef Py_ssize_t a, b
    cdef int it
    cdef double lam = 0.0, lam_old = 0.0, s, r, nrm, fro = 0.0, shift = 0.0
    for a in range(n):
        v[a] = 1.0 / sqrt(<double>n)
        for b in range(n):
            fro += m[a, b] * m[a, b]
            shift += m[a, b]
    fro = sqrt(fro)
    shift = shift / <double>n
    for it in range(1, max_iter + 1):
        for a in range(n):
            s = 0.0
            for b in range(n):
                s += m[a, b] * v[b]
            w[a] = s
        lam = 0.0
        for a in range(n):
            lam += v[a] * w[a]
        r = 0.0
        for a in range(n):
            r += (w[a] - lam * v[a]) * (w[a] - lam * v[a])
        r = sqrt(r)
        value[0] = lam
        resid[0] = r
        if it > 1 and fabs(lam - lam_old) <= value_tol * fabs(lam) and r <= resid_tol * fro:
            return it
        nrm = 0.0
        for a in range(n):
            w[a] = w[a] + shift * v[a]
            nrm += w[a] * w[a]
        nrm = sqrt(nrm)
        if nrm == 0.0:
            return -it
        for a in range(n):
            v[a] = w[a] / nrm
        lam_old = lam
    return -max_iter


def power_iteration(const double[:, ::1] m, double value_tol, double resid_tol,
                    int max_iter):
    """Power iteration from the uniform start vector.

    Returns (value, vector, iterations, residual, converged).
    """
    cdef Py_ssize_t n = m.shape[0]
    vec = np.empty(n, dtype=np.float64)
    work = np.empty(n, dtype=np.float64)
    cdef double[::1] vec_v = vec, work_v = work
    cdef double value = 0.0, resid = 0.0
    cdef int it
    with nogil:
        it = _power(m, vec_v, work_v, value_tol, resid_tol, max_iter, &value, &resid)
    return value, vec, abs(it), resid, it > 0


def batched_power_iteration(const double[:, :, ::1] ms, double value_tol,
                            double resid_tol, int max_iter):
    """Power iteration applied independently to each matrix in a stack."""
    cdef Py_ssize_t count = ms.shape[0], n = ms.shape[1], i
    values = np.empty(count, dtype=np.float64)
    vectors = np.empty((count, n), dtype=np.float64)
    iters = np.empty(count, dtype=np.int64)
    resids = np.empty(count, dtype=np.float64)
    work = np.empty(n, dtype=np.float64)
    cdef double[::1] vals_v = values, res_v = resids, work_v = work
    cdef double[:, ::1] vecs_v = vectors
    cdef long long[::1] it_v = iters
    cdef double value = 0.0, resid = 0.0
    cdef int it
    with nogil:
        for i in range(count):
            it = _power(ms[i], vecs_v[i], work_v, value_tol, resid_tol, max_iter,
                        &value, &resid)
            vals_v[i] = value
            res_v[i] = resid
            it_v[i] = it
    converged = iters > 0
    return values, vectors, np.abs(iters), resids, converged
