"""The pretraining loop.

Each step draws a batch of views, runs the student (and teacher) forward, evaluates
the configured objective over the multi-crop pairs, applies one optimizer step and
then updates the teacher, the support queue or memory bank, and the online probe.
With `distributed.world_size > 1` the step runs on the virtual world: batch-coupled
objectives over all-gathered embeddings, per-sample objectives rank by rank.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from sslforge.data import multicrop_pairs
from sslforge.distributed import VirtualWorld
from sslforge.errors import ConfigError, ContractError, DataError, NumericalAbort
from sslforge.eval import OnlineProbe, rankme
from sslforge.losses import (
    LossOutput,
    PairIndex,
    SupportQueue,
    barlow_twins_loss,
    byol_loss,
    contrastive_pair_loss,
    dccae_correlation_objective,
    dcl_loss,
    dino_loss,
    generalized_loss,
    info_nce,
    invariance_loss,
    masked_recon_loss,
    nca_loss,
    nnclr_loss,
    nt_xent,
    simsiam_loss,
    triplet_loss,
    tuple_loss,
    vicreg_loss,
    wu_nce_loss,
)
from sslforge.losses.spec import (
    BarlowSpec,
    ByolSpec,
    ContrastivePairSpec,
    DccaeSpec,
    DclSpec,
    DinoSpec,
    GeneralizedSpec,
    InfoNceSpec,
    InvarianceSpec,
    MaskedReconSpec,
    NcaSpec,
    NnclrSpec,
    NtXentSpec,
    SimSiamSpec,
    TripletSpec,
    TupleSpec,
    VicRegSpec,
    WuNceSpec,
)
from sslforge.nets import (
    TAP_NAMES,
    Params,
    TapName,
    TeacherState,
    Taps,
    assert_detached,
    assert_untracked,
    center_update,
    ema_update,
    encode,
    init_encoder,
    save_checkpoint,
    teacher_from_student,
)
from sslforge.optim import (
    OptimState,
    ScheduleRow,
    ema_momentum,
    lr_at,
    optimizer_step,
    scaled_lr,
    schedule_table,
)
from sslforge.tensor import Array, Tensor, backward, concat

from .batches import BatchPlan, ViewBatch, build_masked, build_views, epoch_plans, prefetched
from .config import ExperimentConfig
from .datasets import Splits, load_splits
from .embeddings import dump_taps, embed_taps
from .metrics import METRICS_NAME, MetricsRecord, write_metrics

logger = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoint"
EMBEDDINGS_DIR = "embeddings"

Objective = Callable[[list[Tensor], slice], LossOutput]
"""(student outputs per input view, batch rows they cover) -> loss."""


@dataclass
class TrainState:
    step: int
    params: Params
    optim: OptimState
    teacher: TeacherState | None = None
    queue: SupportQueue | None = None
    memory: Array | None = None
    """wu_nce memory bank: last embedding of every training row."""
    seen: NDArray[np.bool_] | None = None
    probe: OnlineProbe | None = None


@dataclass(frozen=True)
class StepOutput:
    loss: float
    terms: dict[str, float]
    grads: dict[str, Array]
    backbone: Array
    """Backbone features of the first global view, for the online probe."""
    student_first: Array
    """Student loss-space outputs of the first view."""
    teacher_globals: list[Array]


@dataclass(frozen=True)
class PretrainResult:
    output_dir: Path
    checkpoint: Path
    metrics: Path
    records: list[MetricsRecord]
    params: Params
    teacher: TeacherState | None
    rankme: dict[TapName, float | None]


def _mean_terms(outputs: Sequence[LossOutput]) -> dict[str, float]:
    return {
        name: float(np.mean([out.terms[name] for out in outputs]))
        for name in outputs[0].terms
    }


def _mean_output(outputs: Sequence[LossOutput]) -> LossOutput:
    total = outputs[0].total
    for out in outputs[1:]:
        total = total + out.total
    return LossOutput(total / len(outputs), _mean_terms(outputs))


class Pretrainer:
    def __init__(self, config: ExperimentConfig, splits: Splits | None = None):
        self.config = config
        self.spec = config.encoder_spec()
        self.loss_spec = config.method.loss
        self.splits = splits or load_splits(config)
        self.world = VirtualWorld(config.distributed.world_size)

        self.policy = config.augment_policy()
        self.multicrop = config.augment.multicrop
        self.pairs = multicrop_pairs(self.multicrop.n_local)
        self.n_views = 2 + self.multicrop.n_local

        self.batch_size = config.distributed.effective_batch
        n_train = len(self.splits.train)
        if self.batch_size > n_train:
            raise ConfigError(
                f"Effective batch {self.batch_size} (world_size × per_device_batch) "
                f"exceeds the {n_train} training images"
            )
        self.steps_per_epoch = n_train // self.batch_size
        self.total_steps = config.run.epochs * self.steps_per_epoch
        self.warmup_steps = min(config.optim.warmup_epochs * self.steps_per_epoch, self.total_steps)
        self.peak_lr = scaled_lr(config.optim.base_lr, self.batch_size, config.optim.lr_scaling)

        self.eval_set = self.splits.eval_subset(config.run.eval_samples)
        self._pair_indices: dict[int, PairIndex] = {}

        logger.info(
            f"Pretraining {self.loss_spec.kind}: {config.run.epochs} epochs × "
            f"{self.steps_per_epoch} steps, batch {self.batch_size} over "
            f"{self.world.world_size} virtual device(s), {len(self.pairs)} view pairs "
            f"per sample, peak lr {self.peak_lr:g}"
        )

    # setup

    @property
    def uses_teacher(self) -> bool:
        return self.loss_spec.uses_teacher

    def lr_for(self, step: int) -> float:
        return lr_at(step, self.total_steps, self.warmup_steps, self.peak_lr)

    def xi_for(self, step: int) -> float:
        ema = self.config.ema
        return ema_momentum(step, self.total_steps, ema.xi_start, ema.schedule)

    def schedule(self) -> list[ScheduleRow]:
        """The (lr, EMA momentum) rows that `step` will use, one per step."""
        ema = self.config.ema
        return schedule_table(
            self.total_steps, self.warmup_steps, self.peak_lr, ema.xi_start, ema.schedule
        )

    def init_state(self) -> TrainState:
        config = self.config
        params = init_encoder(self.spec, config.seed)
        optim = OptimState.create(
            config.optim.kind,
            params,
            lr=self.peak_lr,
            weight_decay=config.optim.weight_decay,
            momentum=config.optim.momentum,
            exempt_bias_and_norm=config.optim.exempt_bias_and_norm,
        )
        state = TrainState(step=0, params=params, optim=optim)

        if self.uses_teacher:
            center_dim = self.spec.projector_dim if isinstance(self.loss_spec, DinoSpec) else None
            state.teacher = teacher_from_student(params, config.ema.xi_start, center_dim)
        match self.loss_spec:
            case NnclrSpec(queue_size=size):
                state.queue = SupportQueue(size, self.spec.projector_dim)
            case WuNceSpec():
                state.memory = np.zeros((len(self.splits.train), self.spec.projector_dim))
                state.seen = np.zeros(len(self.splits.train), dtype=bool)
            case _:
                pass
        if config.eval.online_probe:
            state.probe = OnlineProbe(
                self.spec.trunk.backbone_dim,
                self.splits.num_classes,
                lr=config.eval.online_lr,
            )
        return state

    def batches(self, epoch: int):
        plans = epoch_plans(len(self.splits.train), self.batch_size, epoch, self.config.seed)
        train = self.splits.train
        seed = self.config.seed

        def build(plan: BatchPlan) -> ViewBatch:
            if isinstance(self.loss_spec, MaskedReconSpec):
                return build_masked(
                    train, plan, self.loss_spec.patch, self.loss_spec.ratio, run_seed=seed
                )
            return build_views(train, plan, self.policy, self.multicrop, run_seed=seed)

        return prefetched(build, plans, self.config.run.prefetch)

    def pair_index(self, batch: int) -> PairIndex:
        """Positive pairs over views stacked view-major: row v·B + i is view v of
        sample i."""
        if batch not in self._pair_indices:
            self._pair_indices[batch] = PairIndex.from_pairs(
                ((a * batch + i, o * batch + i) for a, o in self.pairs for i in range(batch)),
                self.n_views * batch,
            )
        return self._pair_indices[batch]

    # forward

    def student_output(self, taps: Taps) -> Tensor:
        """The student tensor the objective consumes."""
        head = taps.predictor if taps.predictor is not None else taps.projector
        match self.loss_spec:
            case MaskedReconSpec():
                assert taps.pixels is not None
                return taps.pixels
            case SimSiamSpec():
                return concat([head, taps.projector], axis=1)
            case ByolSpec():
                return head
            case _:
                return taps.projector

    def teacher_globals(self, state: TrainState, batch: ViewBatch) -> list[Array]:
        if state.teacher is None:
            return []
        weights = state.teacher.tensors()
        outputs = [
            encode(self.spec, weights, view, with_predictor=False).projector
            for view in batch.global_views
        ]
        if self.config.ema.leak_check:
            assert_untracked(outputs[0], "teacher projection")
        return [out.data for out in outputs]

    # objectives

    def pairwise_objective(self, state: TrainState, batch: ViewBatch) -> Objective:
        spec = self.loss_spec

        def objective(E: list[Tensor], rows: slice) -> LossOutput:
            B = E[0].shape[0]
            Z = concat(E, axis=0)
            pairs = self.pair_index(B)
            match spec:
                case NtXentSpec(tau=tau):
                    total = nt_xent(Z, pairs, tau)
                case InfoNceSpec(tau=tau):
                    total = info_nce(Z, pairs, tau)
                case DclSpec(tau=tau):
                    total = dcl_loss(Z, pairs, tau)
                case ContrastivePairSpec(margin=margin):
                    total = contrastive_pair_loss(Z, pairs, margin)
                case NcaSpec():
                    total = nca_loss(Z, pairs)
                case TripletSpec(margin=margin):
                    total = triplet_loss(Z, pairs, margin)
                case TupleSpec(beta=beta):
                    total = tuple_loss(Z, pairs, beta)
                case NnclrSpec(tau=tau):
                    assert state.queue is not None
                    if not len(state.queue):
                        state.queue.push(E[0].data)
                    total = nnclr_loss(Z, pairs, state.queue, tau)
                case GeneralizedSpec():
                    total = generalized_loss(
                        Z, pairs.partner, spec.phi_psi(), include_partner=spec.include_partner
                    )
                case WuNceSpec(tau=tau, beta=beta):
                    memory = self._memory_rows(state, batch, E[0].data)
                    total = wu_nce_loss(Z, np.concatenate([memory] * len(E)), tau, beta)
                case _:
                    raise ContractError(f"{spec.kind} is not a pairwise loss")
            return LossOutput(total)

        return objective

    def _memory_rows(self, state: TrainState, batch: ViewBatch, current: Array) -> Array:
        assert state.memory is not None and state.seen is not None
        rows = batch.plan.rows
        seen = state.seen[rows][:, None]
        return np.where(seen, state.memory[rows], current)

    def branch_objective(self) -> Objective:
        spec = self.loss_spec

        def one_pair(Z1: Tensor, Z2: Tensor) -> LossOutput:
            match spec:
                case VicRegSpec():
                    return vicreg_loss(Z1, Z2, spec)
                case BarlowSpec(lambda_offdiag=lam):
                    return barlow_twins_loss(Z1, Z2, lam)
                case DccaeSpec(penalty=penalty):
                    return dccae_correlation_objective(Z1, Z2, penalty)
                case InvarianceSpec():
                    return invariance_loss(Z1, Z2)
                case _:
                    raise ContractError(f"{spec.kind} is not a two-branch loss")

        def objective(E: list[Tensor], rows: slice) -> LossOutput:
            return _mean_output([one_pair(E[a], E[o]) for a, o in self.pairs])

        return objective

    def teacher_objective(self, state: TrainState, teachers: list[Array]) -> Objective:
        spec = self.loss_spec
        predictor_width = self.spec.tap_dim("predictor") or self.spec.projector_dim

        def one_pair(E: list[Tensor], rows: slice, g: int, v: int) -> Tensor:
            match spec:
                case ByolSpec():
                    return byol_loss(E[v], Tensor(teachers[g][rows]))
                case SimSiamSpec():
                    return simsiam_loss(
                        E[v][:, :predictor_width], E[g][:, predictor_width:]
                    )
                case DinoSpec(tau_s=tau_s, tau_t=tau_t):
                    assert state.teacher is not None and state.teacher.center is not None
                    return dino_loss(
                        E[v], Tensor(teachers[g][rows]), state.teacher.center, tau_s, tau_t
                    )
                case _:
                    raise ContractError(f"{spec.kind} is not a teacher-target loss")

        def objective(E: list[Tensor], rows: slice) -> LossOutput:
            losses = [LossOutput(one_pair(E, rows, g, v)) for g, v in self.pairs]
            return _mean_output(losses)

        return objective

    def masked_objective(self, batch: ViewBatch) -> Objective:
        assert batch.pixel_mask is not None
        target = batch.views[0].reshape(len(batch.views[0]), -1)
        mask = batch.pixel_mask

        def objective(E: list[Tensor], rows: slice) -> LossOutput:
            return masked_recon_loss(E[0], target[rows], mask[rows])

        return objective

    # step

    def compute(self, state: TrainState, batch: ViewBatch) -> StepOutput:
        """Loss, term breakdown and parameter gradients for one batch."""
        family = self.loss_spec.family
        teachers = self.teacher_globals(state, batch)
        match family:
            case "pairwise":
                objective = self.pairwise_objective(state, batch)
            case "branches":
                objective = self.branch_objective()
            case "teacher":
                objective = self.teacher_objective(state, teachers)
            case "masked":
                objective = self.masked_objective(batch)
        inputs = [batch.masked] if batch.masked is not None else batch.views

        captured_backbone: list[Array] = []
        captured_output: list[Array] = []

        def forward(params: Params, images: Tensor) -> Tensor:
            taps = encode(self.spec, params, images)
            out = self.student_output(taps)
            captured_backbone.append(taps.backbone.data)
            captured_output.append(out.data)
            return out

        outputs: list[LossOutput] = []
        world = self.world
        if world.world_size == 1:
            E = [forward(state.params, Tensor(x)) for x in inputs]
            out = objective(E, slice(None))
            outputs.append(out)
            leaf_grads = backward(out.total)
            grads = {
                name: leaf_grads[p] for name, p in state.params.items() if p in leaf_grads
            }
            loss = out.total.item()
        elif family in ("pairwise", "branches"):

            def gathered(*E: Tensor) -> Tensor:
                out = objective(list(E), slice(None))
                outputs.append(out)
                return out.total

            loss, grads = world.value_and_grad(forward, gathered, state.params, inputs)
        else:
            shard = self.config.distributed.per_device_batch
            ranks = iter(range(world.world_size))

            def local(*E: Tensor) -> Tensor:
                rank = next(ranks)
                out = objective(list(E), slice(rank * shard, (rank + 1) * shard))
                outputs.append(out)
                return out.total

            loss, grads = world.local_value_and_grad(forward, local, state.params, inputs)

        # forward runs rank-major, view-minor
        views = len(inputs)
        first = range(0, len(captured_backbone), views)
        terms = _mean_terms(outputs)
        return StepOutput(
            loss=loss,
            terms=terms,
            grads=grads,
            backbone=np.concatenate([captured_backbone[i] for i in first]),
            student_first=np.concatenate([captured_output[i] for i in first]),
            teacher_globals=teachers,
        )

    def step(self, state: TrainState, batch: ViewBatch) -> tuple[TrainState, StepOutput]:
        config = self.config
        out = self.compute(state, batch)

        values = [out.loss, *out.terms.values()]
        if not np.all(np.isfinite(values)) or not all(
            np.all(np.isfinite(g)) for g in out.grads.values()
        ):
            raise NumericalAbort(state.step + 1, {"loss": out.loss, **out.terms})

        if state.teacher is not None and config.ema.leak_check:
            assert_detached(state.teacher, state.params, out.grads)

        lr = self.lr_for(state.step)
        params, optim = optimizer_step(state.params, out.grads, state.optim.with_lr(lr))
        state.params, state.optim = params, optim

        if state.teacher is not None:
            xi = self.xi_for(state.step)
            state.teacher = ema_update(state.teacher, params, xi, config.ema.scope)
            if isinstance(self.loss_spec, DinoSpec) and state.teacher.center is not None:
                state.teacher = state.teacher.with_center(
                    center_update(
                        state.teacher.center,
                        np.concatenate(out.teacher_globals),
                        self.loss_spec.center_momentum,
                    )
                )

        if state.queue is not None:
            state.queue.push(out.student_first)
        if state.memory is not None and state.seen is not None:
            rows = batch.plan.rows
            state.memory[rows] = out.student_first
            state.seen[rows] = True
        if state.probe is not None:
            state.probe.step(out.backbone, batch.labels)

        state.step += 1
        return state, out

    # diagnostics

    def rankme_per_tap(self, params: Params) -> dict[TapName, float | None]:
        taps = embed_taps(self.spec, params, self.eval_set.images, TAP_NAMES)
        values: dict[TapName, float | None] = {tap: None for tap in TAP_NAMES}
        for tap, Z in taps.items():
            try:
                values[tap] = rankme(Z)
            except DataError as e:
                logger.warning(f"RankMe undefined at the {tap} tap: {e}")
        return values

    def record(
        self,
        state: TrainState,
        out: StepOutput,
        epoch: int,
        lr: float,
        started: float,
        ranks: dict[TapName, float | None] | None = None,
    ) -> MetricsRecord:
        ranks = ranks or {}
        terms = out.terms
        return MetricsRecord(
            step=state.step,
            epoch=epoch,
            loss=out.loss,
            inv=terms.get("inv"),
            var=terms.get("var"),
            cov=terms.get("cov"),
            diag=terms.get("diag"),
            offdiag=terms.get("offdiag"),
            recon=terms.get("recon"),
            lr=lr,
            ema_xi=state.teacher.xi if state.teacher else None,
            rankme_backbone=ranks.get("backbone"),
            rankme_projector=ranks.get("projector"),
            rankme_predictor=ranks.get("predictor"),
            online_probe_acc=state.probe.running_accuracy if state.probe else None,
            wall_time=time.perf_counter() - started,
        )

    # loop

    def train(self, state: TrainState | None = None) -> tuple[TrainState, list[MetricsRecord]]:
        config = self.config
        state = state or self.init_state()
        records: list[MetricsRecord] = []
        started = time.perf_counter()

        try:
            for epoch in range(config.run.epochs):
                eval_epoch = (epoch + 1) % config.run.eval_every == 0 or (
                    epoch + 1 == config.run.epochs
                )
                for index, batch in enumerate(self.batches(epoch)):
                    state, out = self.step(state, batch)
                    lr = state.optim.lr

                    last_in_epoch = index + 1 == self.steps_per_epoch
                    ranks = None
                    if last_in_epoch and eval_epoch:
                        ranks = self.rankme_per_tap(state.params)
                    if state.step % config.run.log_every == 0 or ranks is not None:
                        record = self.record(state, out, epoch, lr, started, ranks)
                        records.append(record)
                        logger.info(
                            f"step {state.step}/{self.total_steps} epoch {epoch}: "
                            f"loss {out.loss:.6g} lr {lr:.3g}"
                            + "".join(f" {k} {v:.4g}" for k, v in out.terms.items())
                        )
                    if ranks is not None:
                        logger.info(
                            f"epoch {epoch} RankMe: "
                            + ", ".join(f"{k} {v:.3f}" for k, v in ranks.items() if v is not None)
                        )
        except NumericalAbort:
            self.write_metrics_file(records)
            raise

        return state, records

    def write_metrics_file(self, records: list[MetricsRecord]) -> Path:
        path = self.config.output_dir / METRICS_NAME
        write_metrics(path, records)
        return path


def run_pretrain(config: ExperimentConfig, splits: Splits | None = None) -> PretrainResult:
    """Trains from scratch and writes the run directory: resolved config, metrics,
    checkpoint and train/val embedding dumps at every tap."""
    out_dir = config.output_dir
    config.write_resolved(out_dir)

    trainer = Pretrainer(config, splits)
    state, records = trainer.train()
    metrics_path = trainer.write_metrics_file(records)

    checkpoint = out_dir / CHECKPOINT_DIR
    save_checkpoint(
        checkpoint,
        trainer.spec,
        state.params,
        state.teacher,
        step=state.step,
        seed=config.seed,
    )
    if config.run.dump_embeddings:
        dump_taps(
            out_dir / EMBEDDINGS_DIR,
            trainer.spec,
            state.params,
            {"train": trainer.splits.train, "val": trainer.splits.val},
            config.eval.taps,
            step=state.step,
            seed=config.seed,
        )

    ranks = trainer.rankme_per_tap(state.params)
    logger.info(f"Finished {config.run.name} after {state.step} steps; outputs in {out_dir}")
    return PretrainResult(
        output_dir=out_dir,
        checkpoint=checkpoint,
        metrics=metrics_path,
        records=records,
        params=state.params,
        teacher=state.teacher,
        rankme=ranks,
    )
