import math

import numpy as np
import pytest
from scipy.special import softmax
from sslforge.errors import ContractError, DimensionError
from sslforge.losses import byol_loss, dino_loss, dino_targets, simsiam_loss, symmetrized
from sslforge.tensor import Tensor, backward, check_gradients


@pytest.fixture
def rows() -> np.ndarray:
    return np.random.default_rng(0).normal(size=(5, 4))


@pytest.mark.parametrize(
    "sign,expected",
    [(1.0, 0.0), (-1.0, 4.0)],
    ids=["aligned", "opposite"],
)
def test_byol_aligned_and_opposite(rows: np.ndarray, sign: float, expected: float):
    pred = Tensor(rows, requires_grad=True)
    target = Tensor(sign * rows * 3.0)
    assert byol_loss(pred, target).item() == pytest.approx(expected, abs=1e-12)


def test_byol_orthogonal_is_two():
    pred = Tensor([[1.0, 0.0], [0.0, 2.0]], requires_grad=True)
    target = Tensor([[0.0, 5.0], [3.0, 0.0]])
    assert byol_loss(pred, target).item() == pytest.approx(2.0)


def test_byol_rejects_tracked_teacher(rows: np.ndarray):
    with pytest.raises(ContractError, match="tracked"):
        byol_loss(Tensor(rows, requires_grad=True), Tensor(rows, requires_grad=True))


def test_byol_shape_mismatch(rows: np.ndarray):
    with pytest.raises(DimensionError):
        byol_loss(Tensor(rows), Tensor(rows[:, :3]))


def test_byol_gradient(rows: np.ndarray):
    target = Tensor(np.random.default_rng(1).normal(size=rows.shape))
    report = check_gradients(lambda p: byol_loss(p, target), {"p": rows})
    assert report.max_rel_error < 1e-4


def test_simsiam_identical_is_zero(rows: np.ndarray):
    assert simsiam_loss(Tensor(rows), Tensor(rows)).item() == pytest.approx(0, abs=1e-12)


def test_simsiam_target_branch_gets_no_gradient(rows: np.ndarray):
    pred = Tensor(rows, requires_grad=True)
    proj = Tensor(np.random.default_rng(2).normal(size=rows.shape), requires_grad=True)

    grads = backward(simsiam_loss(pred, proj))

    assert pred in grads
    assert proj not in grads
    assert proj.grad is None


def test_simsiam_symmetric_form_averages_orderings(rows: np.ndarray):
    rng = np.random.default_rng(3)
    p1, z1, p2, z2 = (Tensor(rng.normal(size=rows.shape)) for _ in range(4))
    both = simsiam_loss(p1, z2, p2, z1).item()
    expected = (simsiam_loss(p1, z2).item() + simsiam_loss(p2, z1).item()) / 2
    assert both == pytest.approx(expected, abs=1e-12)


def test_symmetrized_wraps_any_pair_loss(rows: np.ndarray):
    a, b = Tensor(rows), Tensor(rows[::-1].copy())
    value = symmetrized(byol_loss, (a, b), (b, a)).item()
    assert value == pytest.approx(byol_loss(a, a).item(), abs=1e-12)


@pytest.mark.parametrize("dim", [2, 8, 64])
def test_dino_uniform_is_log_k(dim: int):
    teacher = Tensor(np.full((3, dim), 0.7))
    student = Tensor(np.full((3, dim), -2.0), requires_grad=True)
    loss = dino_loss(student, teacher, center=np.zeros(dim))
    assert loss.item() == pytest.approx(math.log(dim), abs=1e-12)


def test_dino_one_hot_target_is_negative_log_prob():
    teacher = Tensor([[1000.0, 0.0, 0.0]])
    logits = np.array([[0.3, 0.1, -0.2]])
    q = softmax(logits / 0.1, axis=1)[0, 0]

    loss = dino_loss(Tensor(logits, requires_grad=True), teacher, np.zeros(3), tau_s=0.1)
    assert loss.item() == pytest.approx(-math.log(q), abs=1e-12)


def test_dino_is_bounded_below_by_target_entropy():
    rng = np.random.default_rng(4)
    teacher = Tensor(rng.normal(size=(6, 5)))
    center = rng.normal(size=5) * 0.1
    targets = dino_targets(teacher, center, tau_t=0.5)
    entropy = -(targets * np.log(targets)).sum(axis=1).mean()

    for _ in range(5):
        student = Tensor(rng.normal(size=(6, 5)), requires_grad=True)
        assert dino_loss(student, teacher, center, tau_s=0.1, tau_t=0.5).item() >= entropy

    matched = Tensor(np.log(targets) * 0.1, requires_grad=True)
    loss = dino_loss(matched, teacher, center, tau_s=0.1, tau_t=0.5)
    assert loss.item() == pytest.approx(entropy, abs=1e-10)


def test_dino_center_shifts_targets():
    teacher = np.array([[1.0, 0.0]])
    shifted = dino_targets(teacher, center=[1.0, 0.0], tau_t=0.1)
    np.testing.assert_allclose(shifted, [[0.5, 0.5]])


def test_dino_gradient():
    rng = np.random.default_rng(5)
    teacher = Tensor(rng.normal(size=(4, 6)))
    center = rng.normal(size=6)
    report = check_gradients(
        lambda s: dino_loss(s, teacher, center, tau_s=0.5, tau_t=0.3),
        {"s": rng.normal(size=(4, 6))},
    )
    assert report.max_rel_error < 1e-4


def test_dino_rejects_tracked_teacher():
    out = Tensor(np.ones((2, 3)), requires_grad=True)
    with pytest.raises(ContractError):
        dino_loss(out, out, np.zeros(3))
