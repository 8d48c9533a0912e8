from __future__ import annotations

from typing import Mapping


class SSLForgeError(Exception):
    """Base class for every error raised by sslforge."""


class DimensionError(SSLForgeError, ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, op: str, *shapes: tuple[int, ...]):
        self.op = op
        self.shapes = shapes
        super().__init__(
            f"{op}: incompatible shapes " + " and ".join(str(s) for s in shapes)
        )


class ParameterError(SSLForgeError, ValueError):
    """A scalar parameter is outside its valid range."""


class ContractError(SSLForgeError, RuntimeError):
    """An API was used in a way its contract forbids."""


class DataError(SSLForgeError, ValueError):
    """Input data is malformed (non-finite, empty, corrupt file)."""


class NumericalError(SSLForgeError, ArithmeticError):
    """A computation is numerically ill-posed."""


class SpecError(SSLForgeError, ValueError):
    """A model or loss spec is invalid or does not match its inputs."""


class ConfigError(SSLForgeError, ValueError):
    """The experiment config failed to load or validate."""


class NumericalAbort(NumericalError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, terms: Mapping[str, float]):
        self.step = step
        self.terms = dict(terms)
        breakdown = ", ".join(f"{k}={v!r}" for k, v in self.terms.items())
        super().__init__(f"Non-finite loss at step {step}: {breakdown}")
