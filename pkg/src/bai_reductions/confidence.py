"""Failure rates represented in log space."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import UsageError


@dataclass(frozen=True, order=True)
class LogConfidence:
    """A failure rate delta stored as ``nats = ln(1/delta)``.

    Reductions raise delta to powers like ``delta0 ** 2048``, which underflows
    a double; in nats that is a multiplication. Composing failure rates by
    product is addition.
    """

    nats: float

    def __post_init__(self):
        if not (self.nats >= 0 and math.isfinite(self.nats)):
            raise UsageError(f"confidence must have finite nats >= 0, got {self.nats!r}")

    @classmethod
    def from_delta(cls, delta: float) -> "LogConfidence":
        if not 0 < delta <= 1:
            raise UsageError(f"delta must lie in (0, 1], got {delta!r}")
        return cls(-math.log(delta))

    @property
    def delta(self) -> float:
        return math.exp(-self.nats)

    def __add__(self, other: "LogConfidence") -> "LogConfidence":
        return LogConfidence(self.nats + other.nats)

    def power(self, k: float) -> "LogConfidence":
        """The confidence ``delta ** k``."""
        return LogConfidence(self.nats * k)
