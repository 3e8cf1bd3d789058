"""Pure-numpy versions of the compiled kernels, same arithmetic order."""

import numpy as np


def outer_product_sum(d):
    """Return sum_j d[j] d[j]^T, accumulated row by row in index order."""
    d = np.ascontiguousarray(d, dtype=np.float64)
    acc = np.zeros((d.shape[1], d.shape[1]))
    for row in d:
        if row.any():
            acc += np.outer(row, row)
    return acc


def _power(m, value_tol, resid_tol, max_iter):
    # Iterates with M + shift*I, shift = e'Me/n; the value and residual use M.
    n = m.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    fro = np.sqrt(np.sum(m * m))
    shift = float(np.sum(m)) / n
    lam = lam_old = 0.0
    resid = 0.0
    for it in range(1, max_iter + 1):
        w = m @ v
        lam = float(v @ w)
        resid = float(np.linalg.norm(w - lam * v))
        if it > 1 and abs(lam - lam_old) <= value_tol * abs(lam) and resid <= resid_tol * fro:
            return lam, v, it, resid, True
        w = w + shift * v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return lam, v, it, resid, False
        v = w / nrm
        lam_old = lam
    return lam, v, max_iter, resid, False


def power_iteration(m, value_tol, resid_tol, max_iter):
    """Power iteration from the uniform start vector.

    Returns (value, vector, iterations, residual, converged).
    """
    return _power(np.ascontiguousarray(m, dtype=np.float64), value_tol, resid_tol, max_iter)


def batched_power_iteration(ms, value_tol, resid_tol, max_iter):
    """Power iteration applied independently to each matrix in a stack."""
    ms = np.ascontiguousarray(ms, dtype=np.float64)
    count, n = ms.shape[0], ms.shape[1]
    values = np.empty(count)
    vectors = np.empty((count, n))
    iters = np.empty(count, dtype=np.int64)
    resids = np.empty(count)
    converged = np.empty(count, dtype=bool)
    for i in range(count):
        values[i], vectors[i], iters[i], resids[i], converged[i] = _power(
            ms[i], value_tol, resid_tol, max_iter
        )
    return values, vectors, iters, resids, converged
