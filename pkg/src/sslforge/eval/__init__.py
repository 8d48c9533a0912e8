"""Representation diagnostics (RankMe, α, numeric rank) and labeled evaluation
(kNN, linear and MLP probes, the online probe)."""

__all__ = [
    "DEFAULT_K",
    "DEFAULT_TEMPERATURE",
    "DumpManifest",
    "EmbeddingDump",
    "KnnMode",
    "KnnResult",
    "OnlineProbe",
    "ProbeConfig",
    "ProbeResult",
    "RANKME_EPS",
    "SpectrumReport",
    "accuracy",
    "alpha_from_spectrum",
    "alpha_req",
    "knn_classify",
    "linear_probe",
    "mlp_probe",
    "numeric_rank",
    "rankme",
    "rankme_from_spectrum",
    "read_embeddings",
    "singular_values",
    "spectrum_report",
    "write_embeddings",
]

from .dumps import DumpManifest, EmbeddingDump, read_embeddings, write_embeddings
from .knn import DEFAULT_K, DEFAULT_TEMPERATURE, KnnMode, KnnResult, knn_classify
from .probes import (
    OnlineProbe,
    ProbeConfig,
    ProbeResult,
    accuracy,
    linear_probe,
    mlp_probe,
)
from .spectrum import (
    RANKME_EPS,
    SpectrumReport,
    alpha_from_spectrum,
    alpha_req,
    numeric_rank,
    rankme,
    rankme_from_spectrum,
    singular_values,
    spectrum_report,
)
