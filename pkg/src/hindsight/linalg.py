"""Nonnegative matrices, dominant eigenpairs and the vector McDiarmid bound."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConvergenceError, DomainError, InvalidMatrixError

DEFAULT_ETA = 1e-16
MAX_ITER = 10_000
VALUE_TOL = 1e-13
RESID_TOL = 1e-10


def as_nonneg_matrix(m):
    """Validate ``m`` as a square, finite, entrywise nonnegative float matrix."""
    a = np.array(m, dtype=np.float64, ndmin=2)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise InvalidMatrixError(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix has nonfinite entries")
    if np.any(a < 0):
        raise InvalidMatrixError("matrix has negative entries")
    return a


def regularize(m, eta=DEFAULT_ETA):
    """Replace every exactly-zero entry of ``m`` with ``eta``.

    Nonzero entries are returned untouched, so the result is strictly
    positive whenever ``eta > 0``.
    """
    if not eta > 0:
        raise DomainError(f"eta must be positive, got {eta}")
    a = as_nonneg_matrix(m).copy()
    a[a == 0.0] = eta
    return a


@dataclass(frozen=True)
class PFEigenpair:
    """Dominant eigenvalue with its unit, nonnegative eigenvector."""

    value: float
    vector: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def _check_positive(a):
    if np.any(a <= 0):
        raise InvalidMatrixError(
            "power iteration needs a strictly positive matrix; call regularize first"
        )


def _dense_pf(a, resid_tol):
    """Dominant eigenpair from the dense eigensolver, or None if it misses
    the residual tolerance. Used when power iteration stalls on a nearly
    reducible matrix whose two leading eigenvalues almost coincide."""
    values, vectors = np.linalg.eig(a)
    k = int(np.argmax(values.real))
    vec = np.abs(vectors[:, k].real)
    vec = vec / np.linalg.norm(vec)
    w = a @ vec
    value = float(vec @ w)
    resid = float(np.linalg.norm(w - value * vec))
    if not (value > 0 and resid <= resid_tol * np.linalg.norm(a)):
        return None
    return value, vec, resid


def perron_frobenius(m, *, max_iter=MAX_ITER, value_tol=VALUE_TOL, resid_tol=RESID_TOL,
                     fallback=True):
    """Perron-Frobenius eigenpair of a strictly positive matrix.

    Power iteration starts from the uniform unit vector. It iterates with
    ``M + s I``, where ``s`` is the mean row sum; this leaves the
    eigenvector unchanged and stops eigenvalues near ``-value`` from slowing
    convergence. Iteration stops once the Rayleigh quotient of ``M`` changes
    by less than ``value_tol`` (relative) and the residual
    ``|M v - value v|`` is at most ``resid_tol * |M|_F``.

    With ``fallback`` a dense eigensolver is tried when the iteration limit
    is hit; its answer is accepted only under the same residual tolerance.

    Raises
    ------
    ConvergenceError
        If no eigenpair meeting the tolerances is found.
    """
    a = as_nonneg_matrix(m)
    _check_positive(a)
    value, vec, iters, resid, ok = kernels.power_iteration(
        np.ascontiguousarray(a), value_tol, resid_tol, int(max_iter)
    )
    if not ok:
        dense = _dense_pf(a, resid_tol) if fallback else None
        if dense is None:
            raise ConvergenceError(
                f"power iteration stopped after {iters} iterations (residual {resid:.3e})",
                residual=resid,
                iterations=iters,
            )
        value, vec, resid = dense
    vec.flags.writeable = False
    return PFEigenpair(float(value), vec, int(iters), float(resid))


def batched_perron_frobenius(ms, *, max_iter=MAX_ITER, value_tol=VALUE_TOL,
                             resid_tol=RESID_TOL, fallback=True):
    """Eigenpairs of a stack of strictly positive ``(n, k, k)`` matrices.

    Returns ``(values, vectors)`` with shapes ``(n,)`` and ``(n, k)``.
    ``fallback`` behaves as in ``perron_frobenius``.
    """
    a = np.ascontiguousarray(ms, dtype=np.float64)
    if a.ndim != 3 or a.shape[1] != a.shape[2]:
        raise InvalidMatrixError(f"expected an (n, k, k) stack, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix stack has nonfinite entries")
    _check_positive(a)
    values, vectors, iters, resids, ok = kernels.batched_power_iteration(
        a, value_tol, resid_tol, int(max_iter)
    )
    for bad in np.flatnonzero(~ok):
        dense = _dense_pf(a[bad], resid_tol) if fallback else None
        if dense is None:
            raise ConvergenceError(
                f"power iteration failed for matrix {bad} (residual {resids[bad]:.3e})",
                residual=float(resids[bad]),
                iterations=int(iters[bad]),
            )
        values[bad], vectors[bad], _ = dense
    return values, vectors


def outer_product_sum(rows):
    """Sum of ``r r^T`` over the rows of a 2-D array, accumulated in row order."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise InvalidMatrixError(f"expected a 2-D array of row vectors, got ndim={rows.ndim}")
    return kernels.outer_product_sum(rows)


def _check_level(rho, name="rho"):
    if not 0.0 < rho < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {rho}")


def mcdiarmid_vector_bound(variation_matrix, rho):
    """Deviation vector whose joint lower-tail probability is at most ``rho``.

    ``variation_matrix`` is ``sum_i c_i c_i^T`` built from per-coordinate
    maximal variations, already regularized. With ``(p, e)`` its dominant
    eigenpair the bound is ``sqrt(-log(rho) / (2 p)) * M e``.
    """
    _check_level(rho)
    pair = perron_frobenius(variation_matrix)
    a = as_nonneg_matrix(variation_matrix)
    return np.sqrt(-np.log(rho) / (2.0 * pair.value)) * (a @ pair.vector)


def mcdiarmid_tail_bound(variation_matrix, eps):
    """Upper bound ``exp(-2 eps^T M eps)`` on the probability that every
    component of ``f - E f`` exceeds the matching entry of ``M eps``."""
    a = as_nonneg_matrix(variation_matrix)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (a.shape[0],) or np.any(eps <= 0):
        raise DomainError("eps must be a strictly positive vector matching the matrix")
    return float(np.exp(-2.0 * eps @ a @ eps))
