import numpy as np
import pytest
from sslforge.errors import ParameterError
from sslforge.tensor import Tensor, check_gradients, finite_diff_grad, relu


def test_sum_gives_ones():
    x = np.random.default_rng(0).normal(size=(3, 4))
    grad = finite_diff_grad(lambda t: t.sum(), x)
    np.testing.assert_allclose(grad.data, np.ones((3, 4)), atol=1e-10)


def test_square_at_three():
    grad = finite_diff_grad(lambda t: (t * t).sum(), Tensor([3.0]), h=1e-5)
    assert grad.data[0] == pytest.approx(6.0, abs=1e-9)


def test_rejects_non_positive_step():
    with pytest.raises(ParameterError):
        finite_diff_grad(lambda t: t.sum(), np.ones(2), h=0.0)


def test_backward_matches_finite_differences_on_random_mlp():
    rng = np.random.default_rng(1)

    def mlp(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor) -> Tensor:
        return (relu(x @ w1 + b1) @ w2).sum()

    report = check_gradients(
        mlp,
        {
            "x": rng.normal(size=(6, 4)),
            "w1": rng.normal(size=(4, 8)),
            "b1": rng.normal(size=8),
            "w2": rng.normal(size=(8, 3)),
        },
    )
    assert report.max_rel_error < 1e-4
    assert set(report.analytic) == {"x", "w1", "b1", "w2"}
