"""Loss configuration: one tagged model per objective, selected by `kind`."""

from __future__ import annotations

from typing import Annotated, ClassVar, Literal, Union

from pydantic import Field, model_validator

from sslforge.core.base import FrozenForgeModel

from .cca import VicRegWeights
from .unified import PhiPsiSpec, RegistryRow, ScalarFn, registry_spec

LossFamily = Literal["pairwise", "teacher", "branches", "masked"]
"""How the training step feeds views to the loss:

- pairwise: all views stacked into one batch with a `PairIndex`
- teacher: student views against an untracked (or stop-gradient) target branch
- branches: two equally-shaped embedding matrices per view pair
- masked: masked patches reconstructed by the pixel head
"""

_Tau = Annotated[float, Field(gt=0)]
_Positive = Annotated[float, Field(gt=0)]
_NonNegative = Annotated[float, Field(ge=0)]


class _LossSpec(FrozenForgeModel):
    family: ClassVar[LossFamily]
    uses_teacher: ClassVar[bool] = False
    uses_predictor: ClassVar[bool] = False


class NtXentSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["nt_xent"] = "nt_xent"
    tau: _Tau = 0.5


class InfoNceSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["info_nce"] = "info_nce"
    tau: _Tau = 0.5


class DclSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["dcl"] = "dcl"
    tau: _Tau = 0.5


class NnclrSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["nnclr"] = "nnclr"
    tau: _Tau = 0.1
    queue_size: Annotated[int, Field(ge=1)] = 512


class ContrastivePairSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["contrastive"] = "contrastive"
    margin: _Positive = 1.0


class NcaSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["nca"] = "nca"


class TripletSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["triplet"] = "triplet"
    margin: _Positive = 0.5


class TupleSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["tuple"] = "tuple"
    beta: _NonNegative = 1e-3


class GeneralizedSpec(_LossSpec):
    """A φ/ψ family member, either a named row or explicit functions."""

    family = "pairwise"
    kind: Literal["generalized"] = "generalized"
    row: RegistryRow | None = None
    """Defaults to the InfoNCE row when no explicit phi/psi are given."""
    tau: _Tau = 0.5
    eps: _NonNegative = 1.0
    c: float = 1.0
    phi: ScalarFn | None = None
    psi: ScalarFn | None = None
    include_partner: bool = False

    @model_validator(mode="after")
    def _check_source(self):
        if (self.phi is None) != (self.psi is None):
            raise ValueError("phi and psi must be given together")
        if self.phi is not None and self.row is not None:
            raise ValueError("Give either a registry row or explicit phi and psi")
        return self

    def phi_psi(self) -> PhiPsiSpec:
        if self.phi is None or self.psi is None:
            return registry_spec(self.row or "infonce", self.tau, self.eps, self.c)
        return PhiPsiSpec(phi=self.phi, psi=self.psi).check()


class WuNceSpec(_LossSpec):
    family = "pairwise"
    kind: Literal["wu_nce"] = "wu_nce"
    tau: _Tau = 0.1
    beta: _NonNegative = 0.1


class ByolSpec(_LossSpec):
    family = "teacher"
    uses_teacher = True
    uses_predictor = True
    kind: Literal["byol"] = "byol"


class SimSiamSpec(_LossSpec):
    family = "teacher"
    uses_predictor = True
    kind: Literal["simsiam"] = "simsiam"


class DinoSpec(_LossSpec):
    family = "teacher"
    uses_teacher = True
    kind: Literal["dino"] = "dino"
    tau_s: _Tau = 0.1
    tau_t: _Tau = 0.05
    center_momentum: Annotated[float, Field(ge=0, lt=1)] = 0.9


class VicRegSpec(_LossSpec, VicRegWeights):
    family = "branches"
    kind: Literal["vicreg"] = "vicreg"


class BarlowSpec(_LossSpec):
    family = "branches"
    kind: Literal["barlow"] = "barlow"
    lambda_offdiag: _NonNegative = 5e-3


class DccaeSpec(_LossSpec):
    family = "branches"
    kind: Literal["dccae"] = "dccae"
    penalty: _NonNegative = 1.0


class InvarianceSpec(_LossSpec):
    family = "branches"
    kind: Literal["invariance"] = "invariance"


class MaskedReconSpec(_LossSpec):
    family = "masked"
    kind: Literal["masked_recon"] = "masked_recon"
    patch: Annotated[int, Field(ge=1)] = 8
    ratio: Annotated[float, Field(gt=0, lt=1)] = 0.75


LossSpec = Annotated[
    Union[
        NtXentSpec,
        InfoNceSpec,
        DclSpec,
        NnclrSpec,
        ContrastivePairSpec,
        NcaSpec,
        TripletSpec,
        TupleSpec,
        GeneralizedSpec,
        WuNceSpec,
        ByolSpec,
        SimSiamSpec,
        DinoSpec,
        VicRegSpec,
        BarlowSpec,
        DccaeSpec,
        InvarianceSpec,
        MaskedReconSpec,
    ],
    Field(discriminator="kind"),
]
