"""The deep-metric-learning lineage up to the InfoNCE offspring.

Every loss sums over the ordered positive pairs of a `PairIndex`; callers wanting a
per-pair average divide by `len(pairs)`.
"""

from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from sslforge.errors import ContractError, DimensionError, ParameterError
from sslforge.tensor import (
    Array,
    Tensor,
    cosine_similarity_matrix,
    exp,
    getitem,
    l2_normalize_rows,
    logsumexp_rows,
    pairwise_distances,
    pairwise_sq_dists,
    relu,
)
from sslforge.tensor.functional import NORM_EPS

from .pairs import PairIndex

logger = logging.getLogger(__name__)

SoftmaxKind = Literal["info_nce", "nt_xent", "dcl"]


def check_batch(op: str, Z: Tensor, pairs: PairIndex):
    if Z.ndim != 2 or Z.shape[0] != pairs.n:
        raise DimensionError(op, Z.shape, (pairs.n,))


def check_tau(tau: float):
    if tau <= 0:
        raise ParameterError(f"Temperature must be positive, got {tau}")


def _check_margin(margin: float):
    if margin <= 0:
        raise ParameterError(f"Margin must be positive, got {margin}")


# metric learning


def contrastive_pair_loss(Z: Tensor, pairs: PairIndex, margin: float) -> Tensor:
    """Σ_pos ‖zᵢ − zⱼ‖ + Σ_neg relu(m − ‖zᵢ − zⱼ‖)² over ordered pairs of distinct rows."""
    check_batch("contrastive_pair_loss", Z, pairs)
    _check_margin(margin)
    D = pairwise_distances(Z)
    pull = (D * pairs.mask).sum()
    push = (relu(margin - D) ** 2 * pairs.negative_mask).sum()
    return pull + push


def nca_loss(Z: Tensor, pairs: PairIndex) -> Tensor:
    """Negative share of the positive-pair affinity in the affinity of all N² ordered pairs."""
    check_batch("nca_loss", Z, pairs)
    if pairs.n < 2:
        raise ParameterError("nca_loss needs at least 2 samples")
    affinity = exp(-pairwise_sq_dists(Z))
    return -(affinity * pairs.mask).sum() / affinity.sum()


def triplet_loss(
    Z: Tensor,
    pairs: PairIndex,
    margin: float,
    *,
    squared: bool = False,
) -> Tensor:
    """Σ over (anchor i, positive j, negative k) of relu(d(i, j) − d(i, k) + m).

    Negatives of an anchor are all rows except itself and its positives.
    """
    check_batch("triplet_loss", Z, pairs)
    _check_margin(margin)
    D = pairwise_sq_dists(Z) if squared else pairwise_distances(Z)
    d_pos = getitem(D, (pairs.anchors, pairs.positives)).reshape(len(pairs), 1)
    d_neg = getitem(D, pairs.anchors)
    negatives = pairs.negative_mask[pairs.anchors]
    return (relu(d_pos - d_neg + margin) * negatives).sum()


def _pair_softmax_over_columns(S: Tensor, pairs: PairIndex) -> Tensor:
    """−Σ_(i,j) log(e^{S_ij} / Σ_(k,l)∈P e^{S_il}); column l counts once per pair."""
    counts = pairs.column_counts
    admitted = np.broadcast_to(counts > 0, S.shape)
    log_weights = np.log(np.where(counts > 0, counts, 1.0))
    lse = logsumexp_rows(S + log_weights, admitted).reshape(pairs.n)
    picked = getitem(S, (pairs.anchors, pairs.positives))
    return (getitem(lse, pairs.anchors) - picked).sum()


def tuple_loss(Z: Tensor, pairs: PairIndex, beta: float) -> Tensor:
    """The (N+1)-tuple loss: inner-product softmax over positive columns plus β‖Z‖²_F."""
    check_batch("tuple_loss", Z, pairs)
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    return _pair_softmax_over_columns(Z @ Z.T, pairs) + beta * (Z * Z).sum()


# InfoNCE family


def denominator_mask(pairs: PairIndex, kind: SoftmaxKind) -> NDArray[np.bool_]:
    """(n, n): which columns k enter the softmax denominator of anchor row i."""
    match kind:
        case "info_nce":
            return np.ones((pairs.n, pairs.n), dtype=bool)
        case "nt_xent":
            return ~np.eye(pairs.n, dtype=bool)
        case "dcl":
            return pairs.negative_mask


def _softmax_pair_loss(Z: Tensor, pairs: PairIndex, tau: float, kind: SoftmaxKind) -> Tensor:
    check_batch(kind, Z, pairs)
    check_tau(tau)
    S = cosine_similarity_matrix(Z, Z) / tau
    mask = denominator_mask(pairs, kind)[pairs.anchors]
    lse = logsumexp_rows(getitem(S, pairs.anchors), mask).reshape(len(pairs))
    return (lse - getitem(S, (pairs.anchors, pairs.positives))).sum()


def info_nce(Z: Tensor, pairs: PairIndex, tau: float) -> Tensor:
    """Cosine softmax whose denominator includes the anchor itself."""
    return _softmax_pair_loss(Z, pairs, tau, "info_nce")


def nt_xent(Z: Tensor, pairs: PairIndex, tau: float) -> Tensor:
    """Cosine softmax over every row but the anchor, temperature in every exponent."""
    return _softmax_pair_loss(Z, pairs, tau, "nt_xent")


def dcl_loss(Z: Tensor, pairs: PairIndex, tau: float) -> Tensor:
    """NT-Xent with the anchor's positives removed from the denominator."""
    return _softmax_pair_loss(Z, pairs, tau, "dcl")


def nce_denominators(
    Z: Tensor | ArrayLike,
    pairs: PairIndex,
    tau: float,
    kind: SoftmaxKind,
) -> Array:
    """Σ_k e^{CoSim(zᵢ, z_k)/τ} over the admitted columns, one value per pair."""
    check_tau(tau)
    Z = Z if isinstance(Z, Tensor) else Tensor(Z)
    S = cosine_similarity_matrix(Z, Z).data / tau
    mask = denominator_mask(pairs, kind)
    return (np.exp(S) * mask).sum(axis=1)[pairs.anchors]


# nearest-neighbour positives


def _normalize(rows: Array) -> Array:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.maximum(norms, NORM_EPS)


class SupportQueue:
    """Fixed-capacity FIFO of ℓ2-normalized embedding rows."""

    def __init__(self, capacity: int, dim: int):
        if capacity < 1 or dim < 1:
            raise ParameterError(f"Invalid queue shape ({capacity}, {dim})")
        self.capacity = capacity
        self.dim = dim
        self._rows = np.zeros((0, dim))

    def __len__(self) -> int:
        return len(self._rows)

    def push(self, rows: Tensor | ArrayLike):
        values = rows.data if isinstance(rows, Tensor) else np.asarray(rows, np.float64)
        if values.ndim != 2 or values.shape[1] != self.dim:
            raise DimensionError("SupportQueue.push", values.shape, (self.capacity, self.dim))
        self._rows = np.concatenate([self._rows, _normalize(values)])[-self.capacity :]
        logger.debug(f"Support queue holds {len(self)}/{self.capacity} rows")

    def nearest(self, Z: Tensor | ArrayLike) -> Array:
        """Row of the queue with the highest cosine similarity to each row of Z."""
        if not len(self):
            raise ContractError("nearest() called on an empty support queue")
        values = Z.data if isinstance(Z, Tensor) else np.asarray(Z, np.float64)
        similarity = _normalize(values) @ self._rows.T
        return self._rows[np.argmax(similarity, axis=1)]

    def snapshot(self) -> Array:
        return self._rows.copy()


def nn_softmax_loss(anchors: Tensor | Array, Z: Tensor, pairs: PairIndex, tau: float) -> Tensor:
    """−Σ_(i,j) log(e^{CoSim(aᵢ, zⱼ)/τ} / Σ_(k,l)∈P e^{CoSim(aᵢ, z_l)/τ})."""
    check_batch("nn_softmax_loss", Z, pairs)
    check_tau(tau)
    anchors = anchors if isinstance(anchors, Tensor) else Tensor(anchors)
    S = cosine_similarity_matrix(anchors, Z) / tau
    return _pair_softmax_over_columns(S, pairs)


def nnclr_loss(Z: Tensor, pairs: PairIndex, queue: SupportQueue, tau: float) -> Tensor:
    """Anchors replaced by their (untracked) nearest neighbour in the support queue."""
    return nn_softmax_loss(queue.nearest(Z), Z, pairs, tau)
