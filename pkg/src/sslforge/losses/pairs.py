from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np
from numpy.typing import NDArray

from sslforge.errors import ParameterError

IntArray = NDArray[np.int64]


@dataclass(frozen=True)
class PairIndex:
    """Ordered positive pairs (i, j) over the rows of a batch.

    Two-view batches put every first view before every second view, so the partner
    of row i is row (i + n) mod 2n, and both directions of each pair are present.
    """

    pairs: tuple[tuple[int, int], ...]
    n: int
    """Number of rows in the batch."""

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"A batch needs at least one row, got {self.n}")
        for i, j in self.pairs:
            if i == j:
                raise ParameterError(f"Positive pair ({i}, {j}) pairs a row with itself")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ParameterError(f"Pair ({i}, {j}) is out of range for {self.n} rows")

    @classmethod
    def two_view(cls, n_samples: int) -> PairIndex:
        n = 2 * n_samples
        return cls(tuple((i, (i + n_samples) % n) for i in range(n)), n)

    @classmethod
    def from_partner(cls, partner: Iterable[int]) -> PairIndex:
        partner = list(partner)
        return cls(tuple(enumerate(partner)), len(partner))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], n: int) -> PairIndex:
        return cls(tuple((int(i), int(j)) for i, j in pairs), n)

    def __len__(self) -> int:
        return len(self.pairs)

    @cached_property
    def anchors(self) -> IntArray:
        return np.array([i for i, _ in self.pairs], dtype=np.int64)

    @cached_property
    def positives(self) -> IntArray:
        return np.array([j for _, j in self.pairs], dtype=np.int64)

    @cached_property
    def mask(self) -> NDArray[np.bool_]:
        """(n, n), True at every positive pair."""
        mask = np.zeros((self.n, self.n), dtype=bool)
        mask[self.anchors, self.positives] = True
        return mask

    @cached_property
    def negative_mask(self) -> NDArray[np.bool_]:
        """(n, n), True for every ordered non-positive pair of distinct rows."""
        return ~self.mask & ~np.eye(self.n, dtype=bool)

    @cached_property
    def column_counts(self) -> NDArray[np.float64]:
        """How often each row occurs as the second element of a pair."""
        return np.bincount(self.positives, minlength=self.n).astype(np.float64)

    @cached_property
    def partner(self) -> IntArray:
        """The view map i → i′; needs exactly one positive per row."""
        partner = np.full(self.n, -1, dtype=np.int64)
        for i, j in self.pairs:
            if partner[i] != -1:
                raise ParameterError(f"Row {i} has more than one positive partner")
            partner[i] = j
        if (partner < 0).any():
            raise ParameterError("Every row needs a positive partner")
        return partner

    def permuted(self, permutation: IntArray) -> PairIndex:
        """The same pairs after row `permutation[k]` moved to position k."""
        inverse = np.argsort(permutation)
        return PairIndex(
            tuple((int(inverse[i]), int(inverse[j])) for i, j in self.pairs), self.n
        )
