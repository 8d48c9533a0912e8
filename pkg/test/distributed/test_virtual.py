from typing import Callable

import numpy as np
import pytest
from sslforge.distributed import VirtualWorld, all_reduce, shard_batch, sync_batch_stats
from sslforge.errors import DimensionError, ParameterError
from sslforge.losses import (
    PairIndex,
    barlow_twins_loss,
    info_nce,
    invariance_loss,
    nt_xent,
    simsiam_loss,
    vicreg_loss,
)
from sslforge.nets import Params
from sslforge.tensor import Tensor, backward, concat

N_ROWS = 16


@pytest.fixture
def params() -> Params:
    rng = np.random.default_rng(0)
    return {
        "proj.weight": Tensor(rng.normal(size=(6, 4)), requires_grad=True),
        "proj.bias": Tensor(rng.normal(size=4), requires_grad=True),
    }


@pytest.fixture
def views() -> list[np.ndarray]:
    rng = np.random.default_rng(1)
    return [rng.normal(size=(N_ROWS, 6)) for _ in range(2)]


def forward(params: Params, X: Tensor) -> Tensor:
    return X @ params["proj.weight"] + params["proj.bias"]


def monolithic(
    loss: Callable[..., Tensor],
    params: Params,
    views: list[np.ndarray],
) -> tuple[float, dict[str, np.ndarray]]:
    fresh = VirtualWorld(1).replicate(params)[0]
    value = loss(*(forward(fresh, Tensor(v)) for v in views))
    grads = backward(value)
    return value.item(), {name: grads[p] for name, p in fresh.items()}


BATCH_LOSSES: list[tuple[str, Callable[..., Tensor]]] = [
    ("nt_xent", lambda z1, z2: nt_xent(concat([z1, z2]), PairIndex.two_view(N_ROWS), 0.5)),
    ("info_nce", lambda z1, z2: info_nce(concat([z1, z2]), PairIndex.two_view(N_ROWS), 0.5)),
    ("vicreg", lambda z1, z2: vicreg_loss(z1, z2).total),
    ("barlow", lambda z1, z2: barlow_twins_loss(z1, z2).total),
]


# sharding


def test_single_rank_shard_is_the_batch():
    batch = np.arange(12.0).reshape(6, 2)
    sharded = shard_batch(batch, 1)
    assert sharded.world_size == 1
    np.testing.assert_array_equal(sharded.shards[0], batch)


def test_one_row_per_rank():
    batch = np.arange(12.0).reshape(6, 2)
    sharded = shard_batch(batch, 6)
    assert sharded.shard_size == 1
    assert sharded.effective_batch == 6


@pytest.mark.parametrize("world_size", [1, 2, 4, 8])
def test_concat_restores_batch_bytewise(world_size: int):
    batch = np.random.default_rng(2).normal(size=(16, 3, 2))
    assert shard_batch(batch, world_size).concat().tobytes() == batch.tobytes()


@pytest.mark.parametrize("world_size", [0, 3, 5])
def test_indivisible_batch(world_size: int):
    with pytest.raises(ParameterError):
        shard_batch(np.ones((8, 2)), world_size)


# gather


def test_gather_forward_is_concatenation():
    world = VirtualWorld(3)
    shards = [Tensor(np.full((2, 2), float(r))) for r in range(3)]
    np.testing.assert_array_equal(
        world.gather_with_grad(shards).data, np.repeat([0.0, 1.0, 2.0], 2)[:, None] * np.ones(2)
    )


def test_gather_quadratic_gradient():
    world = VirtualWorld(4)
    rng = np.random.default_rng(3)
    shards = [Tensor(rng.normal(size=(2, 3)), requires_grad=True) for _ in range(4)]

    gathered = world.gather_with_grad(shards)
    backward((gathered * gathered).sum())

    for shard in shards:
        np.testing.assert_array_equal(shard.grad, 2 * shard.data)


def test_gather_backward_composes_with_gradient_averaging():
    world = VirtualWorld(4)
    full = np.random.default_rng(4).normal(size=(8, 3))
    rank_slices = world.gather_backward([2 * full] * 4)
    for rank, rows in enumerate(rank_slices):
        np.testing.assert_allclose(rows / 4, 2 * full[2 * rank : 2 * rank + 2])


def test_gather_rejects_unequal_shards():
    world = VirtualWorld(2)
    with pytest.raises(DimensionError):
        world.gather_with_grad([Tensor(np.ones((2, 2))), Tensor(np.ones((3, 2)))])


# equivalence with the single-process computation


@pytest.mark.parametrize("world_size", [1, 2, 4, 8])
@pytest.mark.parametrize("name,loss", BATCH_LOSSES, ids=[case[0] for case in BATCH_LOSSES])
def test_batch_coupled_losses_match_monolithic(
    params: Params,
    views: list[np.ndarray],
    world_size: int,
    name: str,
    loss: Callable[..., Tensor],
):
    expected_value, expected_grads = monolithic(loss, params, views)
    value, grads = VirtualWorld(world_size).value_and_grad(forward, loss, params, views)

    assert value == pytest.approx(expected_value, abs=1e-10)
    for key, grad in expected_grads.items():
        np.testing.assert_allclose(grads[key], grad, rtol=0, atol=1e-10)


PER_SAMPLE_LOSSES: list[tuple[str, Callable[..., Tensor]]] = [
    ("simsiam", lambda z1, z2: simsiam_loss(z1, z2, z2, z1)),
    ("invariance", lambda z1, z2: invariance_loss(z1, z2).total),
]


@pytest.mark.parametrize("world_size", [1, 2, 4, 8])
@pytest.mark.parametrize(
    "name,loss", PER_SAMPLE_LOSSES, ids=[case[0] for case in PER_SAMPLE_LOSSES]
)
def test_per_sample_losses_need_no_gather(
    params: Params,
    views: list[np.ndarray],
    world_size: int,
    name: str,
    loss: Callable[..., Tensor],
):
    expected_value, expected_grads = monolithic(loss, params, views)
    value, grads = VirtualWorld(world_size).local_value_and_grad(forward, loss, params, views)

    assert value == pytest.approx(expected_value, abs=1e-10)
    for key, grad in expected_grads.items():
        np.testing.assert_allclose(grads[key], grad, rtol=0, atol=1e-10)


def test_value_and_grad_leaves_params_untouched(params: Params, views: list[np.ndarray]):
    VirtualWorld(2).value_and_grad(forward, BATCH_LOSSES[0][1], params, views)
    assert all(p.grad is None for p in params.values())


# batch statistics


def test_single_rank_stats_are_batch_stats():
    X = np.random.default_rng(5).normal(size=(10, 3))
    mean, var = sync_batch_stats([X])
    np.testing.assert_allclose(mean, X.mean(axis=0))
    np.testing.assert_allclose(var, X.var(axis=0))


def test_two_point_distribution():
    mean, var = sync_batch_stats([np.zeros((4, 1)), np.full((4, 1), 2.0)])
    np.testing.assert_allclose(mean, [1.0])
    np.testing.assert_allclose(var, [1.0])


@pytest.mark.parametrize("world_size", [2, 4, 8])
def test_synced_stats_equal_concatenated(world_size: int):
    X = np.random.default_rng(6).normal(loc=3.0, size=(32, 5))
    world = VirtualWorld(world_size)
    mean, var = world.sync_batch_stats(world.shard(X).shards)
    np.testing.assert_allclose(mean, X.mean(axis=0), rtol=0, atol=1e-12)
    np.testing.assert_allclose(var, X.var(axis=0), rtol=0, atol=1e-12)


# collectives


def test_all_reduce_ops():
    arrays = [np.array([1.0, 2.0]), np.array([3.0, 4.0])]
    np.testing.assert_array_equal(all_reduce(arrays, "sum"), [4.0, 6.0])
    np.testing.assert_array_equal(all_reduce(arrays, "mean"), [2.0, 3.0])


def test_world_collectives_check_rank_count():
    with pytest.raises(DimensionError):
        VirtualWorld(3).all_reduce([np.zeros(2), np.zeros(2)])


def test_replicas_are_independent_leaves(params: Params):
    first, second = VirtualWorld(2).replicate(params)
    assert first["proj.weight"] is not second["proj.weight"]
    np.testing.assert_array_equal(first["proj.weight"].data, params["proj.weight"].data)
    assert first["proj.weight"].requires_grad


def test_average_gradients_divides_by_world_size():
    world = VirtualWorld(2)
    averaged = world.average_gradients([{"w": np.array([2.0])}, {"w": np.array([4.0])}])
    np.testing.assert_array_equal(averaged["w"], [3.0])
