"""
A desk-scale self-supervised learning engine: a small double-precision autodiff core,
the contrastive / distillation / CCA loss families, collapse diagnostics, evaluation
protocols, and a virtual data-parallel layer.
"""

SSLFORGE_ENV_PREFIX = "SSLFORGE_"
