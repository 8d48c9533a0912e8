"""Singular values of small matrices via cyclic Jacobi on the smaller Gram matrix."""

from __future__ import annotations

import logging

import numpy as np

from sslforge.errors import DataError, DimensionError
from sslforge.utils import TRACE

from .tensor import Array, Tensor

logger = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(
    S: Array,
    *,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> tuple[Array, Array]:
    """Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix.

    Sweeps every (p, q) pair in row order, rotating a_pq to zero, until the
    off-diagonal Frobenius norm drops below `tol · max(1, ‖S‖_F)`.
    """
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError("jacobi_eigh", S.shape)

    A = np.array(S, dtype=np.float64)
    A = (A + A.T) / 2
    n = A.shape[0]
    V = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(A)))

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        off = np.sqrt(np.sum(A * A) - np.sum(np.diag(A) ** 2))
        if not off > threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * apq)
                t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1))
                c = 1 / np.sqrt(t * t + 1)
                s = t * c

                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q

    logger.log(TRACE, f"jacobi_eigh: n={n}, sweeps={sweeps}")

    eigenvalues = np.diag(A).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], V[:, order]


def svd_values(M: Tensor | Array) -> Array:
    """Descending singular values of M, min(n, d) of them. Not differentiable.

    Eigenvalues of the smaller Gram matrix by cyclic Jacobi. The diagnostics use
    `scipy.linalg.svdvals` and are tested against this reference.
    """
    data = M.data if isinstance(M, Tensor) else np.asarray(M, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError("svd_values", data.shape)
    if not np.isfinite(data).all():
        raise DataError("svd_values: input contains NaN or Inf")

    n, d = data.shape
    gram = data.T @ data if n >= d else data @ data.T
    eigenvalues, _ = jacobi_eigh(gram)
    return np.sqrt(np.clip(eigenvalues, 0.0, None))
