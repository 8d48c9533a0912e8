import numpy as np
import pytest
from scipy.stats import ortho_group
from sslforge.errors import DataError, ParameterError
from sslforge.eval import (
    alpha_from_spectrum,
    alpha_req,
    numeric_rank,
    rankme,
    rankme_from_spectrum,
    singular_values,
    spectrum_report,
)
from sslforge.tensor import svd_values


def with_spectrum(sigma: np.ndarray, n: int, seed: int = 0) -> np.ndarray:
    """An (n, len(sigma)) matrix with exactly the given singular values."""
    d = len(sigma)
    U = ortho_group.rvs(n, random_state=seed)[:, :d]
    V = ortho_group.rvs(d, random_state=seed + 1)
    return U @ np.diag(sigma) @ V.T


def test_rankme_identity():
    assert rankme(np.eye(4), eps=0) == pytest.approx(4.0, abs=1e-12)


def test_rankme_rank_one():
    rng = np.random.default_rng(0)
    Z = np.outer(rng.normal(size=30), rng.normal(size=8))
    assert rankme(Z, eps=0) == pytest.approx(1.0, abs=1e-9)


def test_rankme_gaussian_is_near_full():
    Z = np.random.default_rng(1).normal(size=(256, 16))
    assert rankme(Z) >= 14


@pytest.mark.parametrize("scale", [1e-3, 0.5, 7.0, 1e4])
def test_rankme_scale_invariance(scale: float):
    Z = np.random.default_rng(2).normal(size=(40, 6))
    assert rankme(scale * Z, eps=0) == pytest.approx(rankme(Z, eps=0), abs=1e-9)


def test_rankme_rotation_invariance():
    Z = np.random.default_rng(3).normal(size=(40, 6))
    Q = ortho_group.rvs(6, random_state=4)
    assert rankme(Z @ Q, eps=0) == pytest.approx(rankme(Z, eps=0), abs=1e-9)


def test_rankme_bounded_by_numeric_rank():
    rng = np.random.default_rng(5)
    Z = rng.normal(size=(50, 3)) @ rng.normal(size=(3, 10))
    sigma = singular_values(Z)
    rank = numeric_rank(sigma, Z.shape)

    assert rank == 3
    assert 1 <= rankme(Z, eps=0) <= rank + 1e-9


@pytest.mark.parametrize(
    "Z",
    [np.zeros((5, 3)), np.array([[np.nan, 1.0], [0.0, 1.0]])],
    ids=["zeros", "nan"],
)
def test_rankme_rejects_degenerate_input(Z: np.ndarray):
    with pytest.raises(DataError):
        rankme(Z)


def test_alpha_exact_power_law():
    sigma = 1.0 / np.arange(1, 41)
    assert alpha_from_spectrum(sigma) == pytest.approx(1.0, abs=1e-6)


def test_alpha_flat_spectrum():
    assert alpha_from_spectrum(np.ones(32)) == pytest.approx(0.0, abs=1e-12)


def test_alpha_noisy_power_law():
    k = np.arange(1, 65)
    noise = 1 + 0.01 * np.random.default_rng(6).normal(size=len(k))
    assert 0.45 <= alpha_from_spectrum(k**-0.5 * noise) <= 0.55


def test_alpha_from_embedding_matrix():
    sigma = 1.0 / np.arange(1, 33)
    Z = with_spectrum(sigma, n=100)
    assert alpha_req(Z) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("fit_range", [None, (1, 5), (3, 40)])
def test_alpha_needs_enough_points(fit_range: tuple[int, int] | None):
    with pytest.raises(ParameterError):
        alpha_from_spectrum(np.ones(10), fit_range)


def test_report_on_short_spectrum():
    report = spectrum_report(np.eye(4), eps=0)
    assert report.rankme == pytest.approx(4.0)
    assert report.alpha is None
    assert report.numeric_rank == 4
    assert report.summary()["sigma_max"] == pytest.approx(1.0)


def test_numeric_rank_threshold():
    sigma = np.array([1.0, 1e-6, 1e-11])
    assert numeric_rank(sigma, (10, 3)) == 2
    assert numeric_rank(np.zeros(3), (10, 3)) == 0


def test_singular_values_descending():
    sigma = singular_values(with_spectrum(np.array([3.0, 2.0, 0.5]), n=8))
    np.testing.assert_allclose(sigma, [3.0, 2.0, 0.5], atol=1e-12)


def test_singular_values_match_jacobi_reference():
    Z = np.random.default_rng(4).normal(size=(40, 6)) @ np.diag([5.0, 3.0, 2.0, 1.0, 0.5, 0.1])

    reference = svd_values(Z)

    np.testing.assert_allclose(singular_values(Z), reference, rtol=1e-9, atol=1e-10)
    assert rankme(Z) == pytest.approx(rankme_from_spectrum(reference), rel=1e-9)
