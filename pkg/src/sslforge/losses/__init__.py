"""Contrastive, self-distillation, canonical-correlation and reconstruction losses."""

__all__ = [
    "CcaResult",
    "GaussianNoise",
    "LossFamily",
    "LossOutput",
    "LossSpec",
    "NceFit",
    "PairIndex",
    "PhiPsiSpec",
    "REGISTRY_ROWS",
    "ScalarFn",
    "SupportQueue",
    "UniformNoise",
    "VicRegWeights",
    "barlow_twins_loss",
    "byol_loss",
    "contrastive_pair_loss",
    "dccae_correlation_objective",
    "dcl_loss",
    "dino_loss",
    "dino_targets",
    "generalized_loss",
    "generalized_nce",
    "generalized_terms",
    "info_nce",
    "invariance_loss",
    "linear_cca",
    "masked_recon_loss",
    "nca_loss",
    "nce_binary_fit",
    "nce_denominators",
    "nce_objective",
    "nn_softmax_loss",
    "nnclr_loss",
    "noise_ratio",
    "nt_xent",
    "registry_spec",
    "simsiam_loss",
    "symmetrized",
    "triplet_loss",
    "tuple_loss",
    "vicreg_loss",
    "wu_nce_loss",
]

from .cca import (
    CcaResult,
    VicRegWeights,
    barlow_twins_loss,
    dccae_correlation_objective,
    invariance_loss,
    linear_cca,
    vicreg_loss,
)
from .contrastive import (
    SupportQueue,
    contrastive_pair_loss,
    dcl_loss,
    info_nce,
    nca_loss,
    nce_denominators,
    nn_softmax_loss,
    nnclr_loss,
    nt_xent,
    triplet_loss,
    tuple_loss,
)
from .distillation import byol_loss, dino_loss, dino_targets, simsiam_loss, symmetrized
from .masked import masked_recon_loss
from .nce import (
    GaussianNoise,
    NceFit,
    UniformNoise,
    nce_binary_fit,
    nce_objective,
    noise_ratio,
    wu_nce_loss,
)
from .output import LossOutput
from .pairs import PairIndex
from .spec import LossFamily, LossSpec
from .unified import (
    REGISTRY_ROWS,
    PhiPsiSpec,
    ScalarFn,
    generalized_loss,
    generalized_nce,
    generalized_terms,
    registry_spec,
)
