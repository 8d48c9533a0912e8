import numpy as np
import pytest
from sslforge.errors import ContractError, DimensionError
from sslforge.tensor import (
    Tensor,
    backward,
    check_gradients,
    concat,
    matmul,
    stop_gradient,
    zero_grad,
)


def test_matmul_identity():
    M = np.arange(9.0).reshape(3, 3)
    out = matmul(Tensor(np.eye(3)), Tensor(M))
    np.testing.assert_array_equal(out.data, M)


def test_matmul_hand_arithmetic():
    out = Tensor([[1, 2], [3, 4]]) @ Tensor([[1], [1]])
    np.testing.assert_array_equal(out.data, [[3], [7]])


def test_matmul_shape_mismatch_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_matmul_gradient_is_ones_times_b_transposed():
    rng = np.random.default_rng(0)
    a = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 3)), requires_grad=True)

    backward((a @ b).sum())

    assert a.grad is not None and b.grad is not None
    np.testing.assert_allclose(a.grad, np.ones((5, 3)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((5, 3)))


def test_backward_of_sum_is_ones():
    x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    grads = backward(x.sum())
    np.testing.assert_array_equal(grads[x], np.ones((2, 3)))


def test_backward_of_squared_norm_is_2x():
    x = Tensor([1.0, -2.0, 0.5], requires_grad=True)
    backward((x * x).sum())
    np.testing.assert_array_equal(x.grad, 2 * x.data)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(x * 2)


def test_backward_twice_requires_reset():
    x = Tensor(np.ones(3), requires_grad=True)
    loss = (x * x).sum()
    backward(loss)

    with pytest.raises(ContractError):
        backward(loss)

    zero_grad(loss, x)
    backward(loss)
    np.testing.assert_array_equal(x.grad, 2 * np.ones(3))


def test_backward_untracked_loss_is_contract_error():
    with pytest.raises(ContractError):
        backward(Tensor(np.ones(3)).sum())


def test_shared_subexpression_accumulates():
    x = Tensor([2.0], requires_grad=True)
    y = x * x
    backward((y + y).sum())
    np.testing.assert_allclose(x.grad, [8.0])


def test_tracked_data_is_read_only():
    x = Tensor(np.zeros(3), requires_grad=True)
    with pytest.raises(ValueError):
        x.data[0] = 1.0


def test_constructor_copies_input():
    source = np.zeros(3)
    t = Tensor(source)
    source[0] = 1.0

    np.testing.assert_array_equal(t.data, np.zeros(3))


def test_stop_gradient_one_sided_product_rule():
    values = np.array([0.5, -1.5, 2.0])
    x = Tensor(values, requires_grad=True)
    backward((stop_gradient(x) * x).sum())
    np.testing.assert_array_equal(x.grad, values)


def test_stop_gradient_blocks_everything():
    x = Tensor(np.ones(3), requires_grad=True)
    y = stop_gradient(x)
    np.testing.assert_array_equal(y.data, x.data)
    assert not y.requires_grad


def test_broadcast_gradients_unbroadcast():
    x = Tensor(np.ones((4, 3)), requires_grad=True)
    bias = Tensor(np.zeros(3), requires_grad=True)
    backward((x + bias).sum())
    np.testing.assert_array_equal(bias.grad, [4.0, 4.0, 4.0])


def test_concat_routes_slices():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((3, 2)), requires_grad=True)
    weights = np.arange(10.0).reshape(5, 2)
    backward((concat([a, b]) * weights).sum())
    np.testing.assert_array_equal(a.grad, weights[:2])
    np.testing.assert_array_equal(b.grad, weights[2:])


def test_getitem_with_repeated_indices_accumulates():
    x = Tensor(np.arange(3.0), requires_grad=True)
    backward(x[np.array([0, 0, 2])].sum())
    np.testing.assert_array_equal(x.grad, [2.0, 0.0, 1.0])


def test_forward_is_bit_identical_across_calls():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(7, 5)), rng.normal(size=(5, 4))
    first = ((Tensor(a) @ Tensor(b)).exp().sum(axis=0)).data
    second = ((Tensor(a) @ Tensor(b)).exp().sum(axis=0)).data
    assert first.tobytes() == second.tobytes()


@pytest.mark.parametrize(
    "name",
    ["exp", "log", "sqrt", "relu", "div", "mean", "transpose", "pow"],
)
def test_primitive_gradients(name: str):
    rng = np.random.default_rng(11)
    x = rng.uniform(0.5, 2.0, size=(3, 4))
    y = rng.uniform(0.5, 2.0, size=(3, 4))

    match name:
        case "exp":
            f = lambda x, y: (x.exp() * y).sum()
        case "log":
            f = lambda x, y: (x.log() * y).sum()
        case "sqrt":
            f = lambda x, y: (x.sqrt() * y).sum()
        case "relu":
            f = lambda x, y: ((x - 1.2).relu() * y).sum()
        case "div":
            f = lambda x, y: (x / y).sum()
        case "mean":
            f = lambda x, y: (x.mean(axis=0) * y.mean(axis=0)).sum()
        case "transpose":
            f = lambda x, y: (x.T @ y).sum()
        case _:
            f = lambda x, y: ((x**3) * y).sum()

    report = check_gradients(f, {"x": x, "y": y})
    assert report.max_rel_error < 1e-4
