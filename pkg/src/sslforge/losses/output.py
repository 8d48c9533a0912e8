from __future__ import annotations

from dataclasses import dataclass, field

from sslforge.tensor import Tensor


@dataclass(frozen=True)
class LossOutput:
    """A scalar loss plus its named, untracked components for logging."""

    total: Tensor
    terms: dict[str, float] = field(default_factory=dict)

    def __float__(self) -> float:
        return self.total.item()
