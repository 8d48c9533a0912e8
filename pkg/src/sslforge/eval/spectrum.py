"""Label-free diagnostics over the singular spectrum of an embedding matrix."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import ArrayLike
from scipy.special import entr
from scipy.stats import linregress

from sslforge.errors import DataError, DimensionError, ParameterError
from sslforge.tensor import Array, Tensor

logger = logging.getLogger(__name__)

RANKME_EPS = 1e-7
"""Added to each normalized singular value before the entropy."""

NUMERIC_RANK_TOL = 1e-12

MIN_FIT_POINTS = 8


def _matrix(Z: Tensor | ArrayLike) -> Array:
    values = np.asarray(Z.data if isinstance(Z, Tensor) else Z, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] < 1:
        raise DimensionError("embedding matrix", values.shape)
    if not np.isfinite(values).all():
        raise DataError("Embedding matrix contains NaN or Inf")
    return values


def singular_values(Z: Tensor | ArrayLike) -> Array:
    """min(n, d) singular values, descending."""
    return scipy.linalg.svdvals(_matrix(Z))


def rankme_from_spectrum(sigma: ArrayLike, eps: float = RANKME_EPS) -> float:
    sigma = np.asarray(sigma, dtype=np.float64)
    total = sigma.sum()
    if not total > 0:
        raise DataError("RankMe is undefined for an all-zero embedding matrix")
    if eps < 0:
        raise ParameterError(f"eps must be non-negative, got {eps}")
    p = sigma / total + eps
    # entr(x) = -x log x with entr(0) = 0
    return math.exp(entr(p).sum())


def rankme(Z: Tensor | ArrayLike, eps: float = RANKME_EPS) -> float:
    """exp of the entropy of the ℓ1-normalized singular values."""
    return rankme_from_spectrum(singular_values(Z), eps)


def default_fit_range(count: int) -> tuple[int, int]:
    """1-based ranks [2, count/2], skipping the head and the noisy tail."""
    return 2, max(count // 2, 2)


def alpha_from_spectrum(
    sigma: ArrayLike,
    fit_range: tuple[int, int] | None = None,
) -> float:
    """Negated least-squares slope of log σₖ against log k over 1-based ranks
    `fit_range` (inclusive)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    first, last = fit_range or default_fit_range(len(sigma))
    if not 1 <= first <= last <= len(sigma):
        raise ParameterError(f"Fit range [{first}, {last}] outside 1..{len(sigma)}")
    if last - first + 1 < MIN_FIT_POINTS:
        raise ParameterError(
            f"alpha needs at least {MIN_FIT_POINTS} singular values in the fit range, "
            f"got {last - first + 1}"
        )

    window = sigma[first - 1 : last]
    if not (window > 0).all():
        raise DataError("Zero singular values inside the alpha fit range")
    ranks = np.arange(first, last + 1, dtype=np.float64)
    fit = linregress(np.log(ranks), np.log(window))
    return -float(fit.slope)


def alpha_req(Z: Tensor | ArrayLike, fit_range: tuple[int, int] | None = None) -> float:
    return alpha_from_spectrum(singular_values(Z), fit_range)


def numeric_rank(sigma: ArrayLike, shape: tuple[int, int]) -> int:
    """Count of σₖ > σ₁ · max(n, d) · 1e-12."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if not len(sigma) or sigma[0] <= 0:
        return 0
    return int((sigma > sigma[0] * max(shape) * NUMERIC_RANK_TOL).sum())


@dataclass(frozen=True)
class SpectrumReport:
    singular_values: Array
    rankme: float
    alpha: float | None
    """None when the spectrum is too short to fit."""
    numeric_rank: int

    def summary(self) -> dict[str, float | int | None]:
        return {
            "rankme": self.rankme,
            "alpha": self.alpha,
            "numeric_rank": self.numeric_rank,
            "sigma_max": float(self.singular_values[0]),
        }


def spectrum_report(
    Z: Tensor | ArrayLike,
    eps: float = RANKME_EPS,
    fit_range: tuple[int, int] | None = None,
) -> SpectrumReport:
    values = _matrix(Z)
    sigma = scipy.linalg.svdvals(values)

    try:
        alpha = alpha_from_spectrum(sigma, fit_range)
    except (ParameterError, DataError) as e:
        logger.debug(f"Skipping alpha: {e}")
        alpha = None

    report = SpectrumReport(
        singular_values=sigma,
        rankme=rankme_from_spectrum(sigma, eps),
        alpha=alpha,
        numeric_rank=numeric_rank(sigma, values.shape),
    )
    logger.debug(f"Spectrum of {values.shape}: {report.summary()}")
    return report
