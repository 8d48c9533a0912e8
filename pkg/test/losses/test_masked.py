import numpy as np
import pytest
from sslforge.errors import DimensionError
from sslforge.losses import masked_recon_loss
from sslforge.tensor import Tensor, check_gradients


@pytest.fixture
def original() -> np.ndarray:
    return np.random.default_rng(0).uniform(size=(2, 8, 8, 3))


@pytest.fixture
def mask() -> np.ndarray:
    mask = np.zeros((2, 8, 8, 3), dtype=bool)
    mask[:, :4, :4] = True
    return mask


def test_perfect_reconstruction(original: np.ndarray, mask: np.ndarray):
    out = masked_recon_loss(Tensor(original), original, mask)
    assert float(out) == 0
    assert out.terms == {"recon": 0.0}


def test_only_masked_entries_count(original: np.ndarray, mask: np.ndarray):
    pred = original + np.where(mask, 0.3, 5.0)
    assert float(masked_recon_loss(Tensor(pred), original, mask)) == pytest.approx(0.09)


def test_empty_mask_is_zero(original: np.ndarray):
    empty = np.zeros(original.shape, dtype=bool)
    assert float(masked_recon_loss(Tensor(original + 1.0), original, empty)) == 0


def test_shape_mismatch(original: np.ndarray, mask: np.ndarray):
    with pytest.raises(DimensionError):
        masked_recon_loss(Tensor(original[:1]), original, mask)


def test_gradient(original: np.ndarray, mask: np.ndarray):
    pred = np.random.default_rng(1).uniform(size=original.shape)[:, :4, :4]
    small_original, small_mask = original[:, :4, :4], mask[:, :4, :4].copy()
    small_mask[:, 0] = False
    report = check_gradients(
        lambda p: masked_recon_loss(p, small_original, small_mask).total,
        {"p": pred},
    )
    assert report.max_rel_error < 1e-4
