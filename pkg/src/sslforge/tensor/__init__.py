"""Double-precision tensors with reverse-mode autodiff and the small linear-algebra
kernels the loss, model and diagnostics modules share."""

__all__ = [
    "Array",
    "GradReport",
    "Tensor",
    "as_tensor",
    "backward",
    "batch_norm_rows",
    "check_gradients",
    "concat",
    "conv2d",
    "cosine_similarity_matrix",
    "cross_entropy",
    "exp",
    "finite_diff_grad",
    "global_avg_pool",
    "jacobi_eigh",
    "l2_normalize_rows",
    "log",
    "log_sigmoid",
    "log_softmax_rows",
    "logsumexp_rows",
    "matmul",
    "maximum",
    "pairwise_distances",
    "pairwise_sq_dists",
    "read_tensor",
    "relu",
    "row_norms",
    "sigmoid",
    "softmax_rows",
    "sqrt",
    "stop_gradient",
    "svd_values",
    "write_tensor",
    "zero_grad",
]

from .functional import (
    batch_norm_rows,
    conv2d,
    cosine_similarity_matrix,
    cross_entropy,
    global_avg_pool,
    l2_normalize_rows,
    log_softmax_rows,
    logsumexp_rows,
    pairwise_distances,
    pairwise_sq_dists,
    row_norms,
    softmax_rows,
)
from .gradcheck import GradReport, check_gradients, finite_diff_grad
from .io import read_tensor, write_tensor
from .linalg import jacobi_eigh, svd_values
from .tensor import (
    Array,
    Tensor,
    as_tensor,
    backward,
    concat,
    exp,
    log,
    log_sigmoid,
    matmul,
    maximum,
    relu,
    sigmoid,
    sqrt,
    stop_gradient,
    zero_grad,
)
