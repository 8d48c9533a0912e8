import numpy as np
import pytest
from sslforge.errors import DimensionError, ParameterError
from sslforge.tensor import (
    Tensor,
    backward,
    batch_norm_rows,
    check_gradients,
    conv2d,
    cosine_similarity_matrix,
    cross_entropy,
    l2_normalize_rows,
    log_softmax_rows,
    logsumexp_rows,
    pairwise_sq_dists,
    softmax_rows,
)


# l2_normalize_rows


def test_normalize_unit_row_unchanged():
    out = l2_normalize_rows(Tensor([[1.0, 0.0, 0.0]]))
    np.testing.assert_array_equal(out.data, [[1.0, 0.0, 0.0]])


def test_normalize_3_4_5():
    out = l2_normalize_rows(Tensor([[3.0, 4.0]]), eps=1e-12)
    np.testing.assert_allclose(out.data, [[0.6, 0.8]], atol=1e-15)


def test_normalize_zero_row_stays_zero():
    out = l2_normalize_rows(Tensor(np.zeros((2, 3))), eps=1e-12)
    np.testing.assert_array_equal(out.data, np.zeros((2, 3)))


def test_normalize_zero_row_has_finite_gradient():
    x = Tensor(np.zeros((1, 3)), requires_grad=True)
    backward(l2_normalize_rows(x).sum())
    assert x.grad is not None
    assert np.isfinite(x.grad).all()


def test_normalize_rejects_non_positive_eps():
    with pytest.raises(ParameterError):
        l2_normalize_rows(Tensor(np.ones((1, 2))), eps=0.0)


def test_normalized_row_norms_are_one_or_less():
    rng = np.random.default_rng(0)
    Z = rng.normal(size=(10, 4)) * rng.uniform(0, 2, size=(10, 1))
    Z[3] = 0.0
    norms = np.linalg.norm(l2_normalize_rows(Tensor(Z)).data, axis=1)
    for norm, row in zip(norms, Z):
        if np.linalg.norm(row) >= 1e-12:
            assert norm == pytest.approx(1.0, abs=1e-12)
        else:
            assert norm <= 1.0


# softmax_rows


def test_softmax_constant_row_is_uniform():
    out = softmax_rows(Tensor(np.full((2, 5), 3.7)), tau=0.3)
    np.testing.assert_allclose(out.data, np.full((2, 5), 0.2), atol=1e-15)


def test_softmax_two_class_closed_form():
    out = softmax_rows(Tensor([[1.0, 0.0]]), tau=1.0)
    e = np.e
    np.testing.assert_allclose(out.data, [[e / (e + 1), 1 / (e + 1)]], atol=1e-15)


def test_softmax_low_temperature_is_nearly_one_hot():
    out = softmax_rows(Tensor([[1.0, 0.0]]), tau=0.01)
    np.testing.assert_allclose(out.data, [[1.0, 0.0]], atol=1e-8)


@pytest.mark.parametrize("tau", [0.0, -1.0])
def test_softmax_rejects_non_positive_tau(tau: float):
    with pytest.raises(ParameterError):
        softmax_rows(Tensor(np.ones((1, 2))), tau=tau)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(1)
    out = softmax_rows(Tensor(rng.normal(size=(8, 6)) * 30), tau=0.5)
    np.testing.assert_allclose(out.data.sum(axis=1), np.ones(8), atol=1e-12)


def test_log_softmax_matches_log_of_softmax():
    rng = np.random.default_rng(2)
    Z = Tensor(rng.normal(size=(4, 5)))
    np.testing.assert_allclose(
        log_softmax_rows(Z, 0.7).data, np.log(softmax_rows(Z, 0.7).data), atol=1e-12
    )


def test_masked_logsumexp_ignores_excluded_entries():
    S = Tensor([[1000.0, 1.0, 2.0]])
    mask = np.array([[False, True, True]])
    out = logsumexp_rows(S, mask)
    assert out.data[0, 0] == pytest.approx(np.log(np.e + np.e**2))


def test_masked_logsumexp_rejects_empty_row():
    with pytest.raises(ParameterError):
        logsumexp_rows(Tensor(np.zeros((1, 2))), np.zeros((1, 2), dtype=bool))


# cosine_similarity_matrix


def test_cosine_orthonormal_rows_give_identity():
    Q, _ = np.linalg.qr(np.random.default_rng(4).normal(size=(5, 5)))
    out = cosine_similarity_matrix(Tensor(Q), Tensor(Q))
    np.testing.assert_allclose(out.data, np.eye(5), atol=1e-12)


def test_cosine_antipodal_is_minus_one():
    a = np.array([[1.0, 2.0, -0.5]])
    out = cosine_similarity_matrix(Tensor(a), Tensor(-a))
    assert out.data[0, 0] == pytest.approx(-1.0)


def test_cosine_matches_entry_loop():
    rng = np.random.default_rng(5)
    A, B = rng.normal(size=(3, 5)), rng.normal(size=(4, 5))
    out = cosine_similarity_matrix(Tensor(A), Tensor(B)).data
    for i in range(3):
        for j in range(4):
            expected = A[i] @ B[j] / (np.linalg.norm(A[i]) * np.linalg.norm(B[j]))
            assert out[i, j] == pytest.approx(expected, abs=1e-12)


def test_cosine_dimension_mismatch():
    with pytest.raises(DimensionError):
        cosine_similarity_matrix(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 4))))


# composite gradients


def test_gradients_of_normalization_and_softmax():
    rng = np.random.default_rng(6)
    weights = rng.normal(size=(4, 3))

    report = check_gradients(
        lambda Z: (softmax_rows(l2_normalize_rows(Z), 0.5) * weights).sum(),
        {"Z": rng.normal(size=(4, 3))},
    )
    assert report.max_rel_error < 1e-4


def test_gradients_of_cosine_and_sq_dists():
    rng = np.random.default_rng(7)

    report = check_gradients(
        lambda A, B: (cosine_similarity_matrix(A, B) * pairwise_sq_dists(A, B)).sum(),
        {"A": rng.normal(size=(3, 4)), "B": rng.normal(size=(5, 4))},
    )
    assert report.max_rel_error < 1e-4


def test_gradients_of_cross_entropy_and_batch_norm():
    rng = np.random.default_rng(8)
    labels = np.array([0, 2, 1, 2, 0])

    report = check_gradients(
        lambda X: cross_entropy(batch_norm_rows(X), labels),
        {"X": rng.normal(size=(5, 3))},
    )
    assert report.max_rel_error < 1e-4


def test_conv2d_matches_direct_loop():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(2, 3, 7, 7))
    W = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)

    out = conv2d(Tensor(X), Tensor(W), Tensor(b), stride=2, padding=1).data

    padded = np.pad(X, ((0, 0), (0, 0), (1, 1), (1, 1)))
    assert out.shape == (2, 4, 4, 4)
    for n in range(2):
        for o in range(4):
            for i in range(4):
                for j in range(4):
                    patch = padded[n, :, 2 * i : 2 * i + 3, 2 * j : 2 * j + 3]
                    expected = (patch * W[o]).sum() + b[o]
                    assert out[n, o, i, j] == pytest.approx(expected, abs=1e-12)


def test_conv2d_gradients():
    rng = np.random.default_rng(10)

    report = check_gradients(
        lambda X, W, b: (conv2d(X, W, b, stride=2, padding=1) ** 2).sum(),
        {
            "X": rng.normal(size=(2, 2, 5, 5)),
            "W": rng.normal(size=(3, 2, 3, 3)),
            "b": rng.normal(size=3),
        },
    )
    assert report.max_rel_error < 1e-4
