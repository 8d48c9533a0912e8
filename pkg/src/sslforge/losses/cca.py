"""The canonical-correlation family: closed-form linear CCA and the differentiable
objectives (DCCAE, VICReg, Barlow Twins) that impose its constraints softly."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Annotated

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike
from pydantic import Field

from sslforge.core.base import FrozenForgeModel
from sslforge.errors import DimensionError, NumericalError, ParameterError
from sslforge.tensor import Array, Tensor, maximum, relu, sqrt

from .output import LossOutput

logger = logging.getLogger(__name__)

CCA_RIDGE = 1e-8


@dataclass(frozen=True)
class CcaResult:
    correlations: Array
    """Top-d canonical correlations, descending, in [0, 1]."""
    x_weights: Array
    """(dx, d) projection composed with the whitening of X."""
    y_weights: Array
    x_mean: Array
    y_mean: Array

    def project(self, X: ArrayLike, Y: ArrayLike) -> tuple[Array, Array]:
        return (
            (np.asarray(X) - self.x_mean) @ self.x_weights,
            (np.asarray(Y) - self.y_mean) @ self.y_weights,
        )


def _inverse_sqrt(cov: Array, ridge: float, name: str) -> Array:
    eigvals, eigvecs = scipy.linalg.eigh(cov)
    if eigvals.min() <= 2 * ridge:
        raise NumericalError(
            f"Covariance of {name} is singular (smallest eigenvalue {eigvals.min():.3g})"
        )
    return (eigvecs / np.sqrt(eigvals)) @ eigvecs.T


def linear_cca(
    X: Tensor | ArrayLike,
    Y: Tensor | ArrayLike,
    d: int,
    ridge: float = CCA_RIDGE,
) -> CcaResult:
    """Canonical correlations from the SVD of Σx^{-1/2} Σxy Σy^{-1/2}."""
    X = np.asarray(X.data if isinstance(X, Tensor) else X, dtype=np.float64)
    Y = np.asarray(Y.data if isinstance(Y, Tensor) else Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise DimensionError("linear_cca", X.shape, Y.shape)
    (n, dx), dy = X.shape, Y.shape[1]
    if n <= max(dx, dy):
        raise ParameterError(f"linear_cca needs more samples ({n}) than dimensions")
    if not 1 <= d <= min(dx, dy):
        raise ParameterError(f"d must be in [1, {min(dx, dy)}], got {d}")

    x_mean, y_mean = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - x_mean, Y - y_mean
    cov_x = Xc.T @ Xc / (n - 1) + ridge * np.eye(dx)
    cov_y = Yc.T @ Yc / (n - 1) + ridge * np.eye(dy)
    cov_xy = Xc.T @ Yc / (n - 1)

    whiten_x = _inverse_sqrt(cov_x, ridge, "X")
    whiten_y = _inverse_sqrt(cov_y, ridge, "Y")
    U, s, Vt = scipy.linalg.svd(whiten_x @ cov_xy @ whiten_y)

    return CcaResult(
        correlations=np.clip(s[:d], 0.0, 1.0),
        x_weights=whiten_x @ U[:, :d],
        y_weights=whiten_y @ Vt.T[:, :d],
        x_mean=x_mean,
        y_mean=y_mean,
    )


def _centered(Z: Tensor) -> Tensor:
    return Z - Z.mean(axis=0, keepdims=True)


def _check_branches(op: str, Z1: Tensor, Z2: Tensor):
    if Z1.ndim != 2 or Z1.shape != Z2.shape:
        raise DimensionError(op, Z1.shape, Z2.shape)
    if Z1.shape[0] < 2:
        raise ParameterError(f"{op} needs at least 2 rows, got {Z1.shape[0]}")


def _off_diagonal_sq_sum(C: Tensor) -> Tensor:
    off = 1.0 - np.eye(C.shape[0])
    return (C * C * off).sum()


def dccae_correlation_objective(U: Tensor, V: Tensor, penalty: float = 1.0) -> LossOutput:
    """−tr(UcᵀVc)/n plus `penalty`·(‖UcᵀUc/n − I‖² + ‖VcᵀVc/n − I‖²)."""
    _check_branches("dccae_correlation_objective", U, V)
    if penalty < 0:
        raise ParameterError(f"penalty must be non-negative, got {penalty}")
    n, d = U.shape
    Uc, Vc = _centered(U), _centered(V)
    eye = np.eye(d)

    corr = -(Uc * Vc).sum() / n
    gap_u = Uc.T @ Uc / n - eye
    gap_v = Vc.T @ Vc / n - eye
    constraint = (gap_u * gap_u).sum() + (gap_v * gap_v).sum()

    total = corr + penalty * constraint
    return LossOutput(total, {"corr": corr.item(), "penalty": constraint.item()})


class VicRegWeights(FrozenForgeModel):
    inv: Annotated[float, Field(ge=0)] = 25.0
    var: Annotated[float, Field(ge=0)] = 25.0
    cov: Annotated[float, Field(ge=0)] = 1.0
    gamma: Annotated[float, Field(gt=0)] = 1.0
    eps: Annotated[float, Field(ge=0)] = 1e-4


def _variance_term(Z: Tensor, gamma: float, eps: float) -> Tensor:
    Zc = _centered(Z)
    var = (Zc * Zc).sum(axis=0) / (Z.shape[0] - 1)
    return relu(gamma - sqrt(var + eps)).mean()


def _covariance_term(Z: Tensor) -> Tensor:
    Zc = _centered(Z)
    cov = Zc.T @ Zc / (Z.shape[0] - 1)
    return _off_diagonal_sq_sum(cov) / Z.shape[1]


def vicreg_loss(Z1: Tensor, Z2: Tensor, w: VicRegWeights | None = None) -> LossOutput:
    w = w or VicRegWeights()
    _check_branches("vicreg_loss", Z1, Z2)

    diff = Z1 - Z2
    inv = (diff * diff).sum(axis=1).mean()
    var = _variance_term(Z1, w.gamma, w.eps) + _variance_term(Z2, w.gamma, w.eps)
    cov = _covariance_term(Z1) + _covariance_term(Z2)

    total = w.inv * inv + w.var * var + w.cov * cov
    return LossOutput(total, {"inv": inv.item(), "var": var.item(), "cov": cov.item()})


def invariance_loss(Z1: Tensor, Z2: Tensor) -> LossOutput:
    """VICReg's invariance term alone, the textbook collapsing objective."""
    _check_branches("invariance_loss", Z1, Z2)
    diff = Z1 - Z2
    inv = (diff * diff).sum(axis=1).mean()
    return LossOutput(inv, {"inv": inv.item()})


STD_FLOOR = 1e-8


def _standardized(Z: Tensor) -> Tensor:
    Zc = _centered(Z)
    std = sqrt((Zc * Zc).mean(axis=0, keepdims=True))
    return Zc / maximum(std, STD_FLOOR)


def barlow_twins_loss(Z1: Tensor, Z2: Tensor, lambda_offdiag: float = 5e-3) -> LossOutput:
    """Σ_p (C_pp − 1)² + λ Σ_{p≠q} C_pq² over the cross-correlation of the standardized
    branches."""
    _check_branches("barlow_twins_loss", Z1, Z2)
    if lambda_offdiag < 0:
        raise ParameterError(f"lambda_offdiag must be non-negative, got {lambda_offdiag}")
    n, d = Z1.shape
    C = _standardized(Z1).T @ _standardized(Z2) / n

    on = C * np.eye(d) - np.eye(d)
    diag = (on * on).sum()
    offdiag = _off_diagonal_sq_sum(C)
    total = diag + lambda_offdiag * offdiag
    return LossOutput(total, {"diag": diag.item(), "offdiag": offdiag.item()})
