"""Composite kernels built from the primitive ops in `tensor.py`."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray

from sslforge.errors import DimensionError, ParameterError

from .tensor import (
    Array,
    Tensor,
    exp,
    getitem,
    log,
    maximum,
    sqrt,
)

NORM_EPS = 1e-12
"""Floor on row norms for normalization and cosine similarity."""


def row_norms(Z: Tensor) -> Tensor:
    """Euclidean norm of every row, shape (n, 1)."""
    return sqrt((Z * Z).sum(axis=1, keepdims=True))


def l2_normalize_rows(Z: Tensor, eps: float = NORM_EPS) -> Tensor:
    """v / max(‖v‖₂, eps) for every row v; zero rows stay zero."""
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    return Z / maximum(row_norms(Z), eps)


def cosine_similarity_matrix(A: Tensor, B: Tensor, eps: float = NORM_EPS) -> Tensor:
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError("cosine_similarity_matrix", A.shape, B.shape)
    return l2_normalize_rows(A, eps) @ l2_normalize_rows(B, eps).T


def _check_tau(tau: float):
    if tau <= 0:
        raise ParameterError(f"Temperature must be positive, got {tau}")


def softmax_rows(Z: Tensor, tau: float = 1.0) -> Tensor:
    _check_tau(tau)
    scaled = Z / tau
    shifted = scaled - scaled.data.max(axis=1, keepdims=True)
    e = exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(Z: Tensor, tau: float = 1.0) -> Tensor:
    _check_tau(tau)
    scaled = Z / tau
    return scaled - logsumexp_rows(scaled)


def logsumexp_rows(S: Tensor, mask: NDArray[np.bool_] | None = None) -> Tensor:
    """log Σ_k exp(S_ik) per row, shape (n, 1), over entries where `mask` is True.

    Rows without any admitted entry are a parameter error.
    """
    if mask is None:
        shift = S.data.max(axis=1, keepdims=True)
        return log(exp(S - shift).sum(axis=1, keepdims=True)) + shift

    if mask.shape != S.shape:
        raise DimensionError("logsumexp_rows mask", S.shape, mask.shape)
    if not mask.any(axis=1).all():
        raise ParameterError("logsumexp_rows: a row has no admitted entries")

    weights = mask.astype(np.float64)
    shift = np.where(mask, S.data, -np.inf).max(axis=1, keepdims=True)
    # excluded entries are zeroed before exp so they cannot overflow
    e = exp((S - shift) * weights) * weights
    return log(e.sum(axis=1, keepdims=True)) + shift


def pairwise_sq_dists(A: Tensor, B: Tensor | None = None) -> Tensor:
    """‖a_i − b_j‖² for every row pair, computed from explicit differences."""
    B = A if B is None else B
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError("pairwise_sq_dists", A.shape, B.shape)
    (n, d), m = A.shape, B.shape[0]
    diff = A.reshape(n, 1, d) - B.reshape(1, m, d)
    return (diff * diff).sum(axis=2)


def pairwise_distances(A: Tensor, B: Tensor | None = None) -> Tensor:
    return sqrt(pairwise_sq_dists(A, B))


def cross_entropy(logits: Tensor, labels: ArrayLike) -> Tensor:
    """Mean negative log-likelihood of integer `labels` under row-softmax `logits`."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError("cross_entropy", logits.shape, labels.shape)
    log_probs = log_softmax_rows(logits)
    picked = getitem(log_probs, (np.arange(len(labels)), labels))
    return -picked.mean()


def batch_norm_rows(X: Tensor, eps: float = 1e-5) -> Tensor:
    """Standardizes every column over the batch (biased variance, no affine)."""
    centered = X - X.mean(axis=0, keepdims=True)
    var = (centered * centered).mean(axis=0, keepdims=True)
    return centered / sqrt(var + eps)


def global_avg_pool(X: Tensor) -> Tensor:
    """(N, C, H, W) -> (N, C)."""
    return X.mean(axis=(2, 3))


def conv2d(
    X: Tensor,
    W: Tensor,
    b: Tensor | None = None,
    *,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """2-D cross-correlation of (N, C, H, W) input with (O, C, k, k) filters.

    Lowered to one matmul over im2col patches; the backward pass scatters patch
    gradients back with k·k fixed-order strided adds.
    """
    if X.ndim != 4 or W.ndim != 4 or X.shape[1] != W.shape[1]:
        raise DimensionError("conv2d", X.shape, W.shape)
    if b is not None and b.shape != (W.shape[0],):
        raise DimensionError("conv2d bias", W.shape, b.shape)

    n, c, h, w = X.shape
    o, _, k, k2 = W.shape
    if k != k2:
        raise DimensionError("conv2d square kernel", W.shape)

    padded = np.pad(X.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = padded.shape[2:]
    if hp < k or wp < k:
        raise DimensionError("conv2d input smaller than kernel", X.shape, W.shape)

    windows = sliding_window_view(padded, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2:4]
    # (N, Ho, Wo, C, k, k) -> rows of flattened patches
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    kernel = W.data.reshape(o, c * k * k)

    out = cols @ kernel.T
    if b is not None:
        out = out + b.data
    out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def backward(g: Array):
        g_rows = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        grad_w = (g_rows.T @ cols).reshape(W.shape)
        grad_b = g_rows.sum(axis=0) if b is not None else None

        grad_cols = (g_rows @ kernel).reshape(n, ho, wo, c, k, k)
        grad_padded = np.zeros_like(padded)
        for i in range(k):
            for j in range(k):
                grad_padded[
                    :, :, i : i + stride * ho : stride, j : j + stride * wo : stride
                ] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        grad_x = grad_padded[:, :, padding : padding + h, padding : padding + w]
        return (grad_x, grad_w, grad_b)

    parents = (X, W) if b is None else (X, W, b)
    return Tensor.from_op(out, "conv2d", parents, backward)
