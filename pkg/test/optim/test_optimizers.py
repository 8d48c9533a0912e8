import numpy as np
import pytest
from sslforge.errors import DimensionError
from sslforge.optim import OptimState, adam_step, decay_exempt, sgd_step
from sslforge.tensor import Tensor


def params_of(**values: list[float]) -> dict[str, Tensor]:
    return {k: Tensor(v, requires_grad=True) for k, v in values.items()}


def test_plain_gradient_descent():
    params = params_of(w=[1.0, 2.0])
    state = OptimState.create("sgd", params, lr=0.1, momentum=0.0)

    new, state = sgd_step(params, {"w": np.array([1.0, -1.0])}, state)

    np.testing.assert_allclose(new["w"].data, [0.9, 2.1])
    assert state.step == 1


def test_weight_decay_alone_shrinks():
    params = params_of(w=[1.0, -3.0])
    state = OptimState.create("sgd", params, lr=0.1, weight_decay=0.5, momentum=0.0)

    new, _ = sgd_step(params, {"w": np.zeros(2)}, state)

    np.testing.assert_allclose(new["w"].data, [0.95, -2.85])


def test_bias_is_exempt_from_decay():
    params = params_of(**{"head.0.weight": [1.0], "head.0.bias": [1.0]})
    state = OptimState.create("sgd", params, lr=0.1, weight_decay=0.5, momentum=0.0)

    new, _ = sgd_step(params, {}, state)

    np.testing.assert_allclose(new["head.0.weight"].data, [0.95])
    np.testing.assert_allclose(new["head.0.bias"].data, [1.0])


@pytest.mark.parametrize(
    "name,exempt",
    [("trunk.conv0.bias", True), ("projector.bn1.weight", True), ("trunk.0.weight", False)],
)
def test_decay_exempt_names(name: str, exempt: bool):
    assert decay_exempt(name) == exempt


def test_decoupled_decay_equals_l2_penalty_for_plain_sgd():
    rng = np.random.default_rng(0)
    p0, g = rng.normal(size=4), rng.normal(size=4)
    lam, lr = 0.3, 0.05

    decayed = OptimState.create(
        "sgd", params_of(w=list(p0)), lr=lr, weight_decay=lam, momentum=0
    )
    plain = OptimState.create("sgd", params_of(w=list(p0)), lr=lr, momentum=0)

    a, _ = sgd_step(params_of(w=list(p0)), {"w": g}, decayed)
    # gradient of λ/2·‖p‖² is λ·p
    b, _ = sgd_step(params_of(w=list(p0)), {"w": g + lam * p0}, plain)

    np.testing.assert_allclose(a["w"].data, b["w"].data, rtol=1e-12)


def test_sgd_quadratic_bowl_converges():
    params = params_of(w=[1.0, -2.0, 0.5])
    state = OptimState.create("sgd", params, lr=0.1, momentum=0.0)
    for _ in range(200):
        params, state = sgd_step(params, {"w": params["w"].data}, state)
    assert np.abs(params["w"].data).max() < 1e-6


def test_sgd_momentum_accumulates():
    params = params_of(w=[0.0])
    state = OptimState.create("sgd", params, lr=1.0, momentum=0.5)
    g = {"w": np.array([1.0])}

    params, state = sgd_step(params, g, state)
    params, state = sgd_step(params, g, state)

    # velocities 1 then 1.5
    np.testing.assert_allclose(params["w"].data, [-2.5])


def test_adam_constant_gradient_step_tends_to_lr():
    params = params_of(w=[0.0, 0.0])
    state = OptimState.create("adam", params, lr=0.01)
    g = {"w": np.array([3.0, -0.2])}
    for _ in range(50):
        previous = params["w"].data
        params, state = adam_step(params, g, state)

    np.testing.assert_allclose(np.abs(params["w"].data - previous), 0.01, rtol=1e-6)


def test_adam_zero_gradient_keeps_params():
    params = params_of(w=[1.0, 2.0])
    state = OptimState.create("adam", params, lr=0.1)
    new, _ = adam_step(params, {"w": np.zeros(2)}, state)
    np.testing.assert_array_equal(new["w"].data, [1.0, 2.0])


def test_adam_quadratic_bowl_converges():
    params = params_of(w=[1.0, -2.0, 0.5])
    state = OptimState.create("adam", params, lr=0.05)
    for _ in range(1000):
        params, state = adam_step(params, {"w": params["w"].data}, state)
    assert np.abs(params["w"].data).max() < 1e-2


def test_steps_are_deterministic():
    params = params_of(w=[1.0, 2.0])
    g = {"w": np.array([0.3, -0.7])}
    state = OptimState.create("adam", params, lr=0.1, weight_decay=0.1)

    a, _ = adam_step(params, g, state)
    b, _ = adam_step(params, g, state)
    assert a["w"].data.tobytes() == b["w"].data.tobytes()


def test_gradient_shape_mismatch():
    params = params_of(w=[1.0, 2.0])
    state = OptimState.create("sgd", params, lr=0.1)
    with pytest.raises(DimensionError):
        sgd_step(params, {"w": np.zeros(3)}, state)
