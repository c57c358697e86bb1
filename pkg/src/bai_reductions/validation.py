"""Input checks shared by the estimators and the harness."""
from __future__ import annotations

import numbers

import numpy as np

from .env import BanditInstance, RandomStream, Sampler
from .exceptions import UsageError


def check_random_stream(seed) -> RandomStream:
    """Turn an int seed or an existing stream into a :class:`RandomStream`.

    There is no default: every run must name its seed.
    """
    if isinstance(seed, RandomStream):
        return seed
    if isinstance(seed, numbers.Integral) and not isinstance(seed, bool):
        return RandomStream(int(seed))
    raise UsageError(f"expected an integer seed or a RandomStream, got {seed!r}")


def check_count(value, name: str, minimum: int = 1) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise UsageError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise UsageError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_bandit(bandit) -> tuple[Sampler, np.ndarray | None]:
    """Split a bandit into a reward sampler and, when known, its variances."""
    if isinstance(bandit, BanditInstance):
        return bandit.sampler(), bandit.variances
    if isinstance(bandit, Sampler):
        return bandit, None
    raise UsageError(f"expected a BanditInstance or Sampler, got {type(bandit).__name__}")


def check_fitted(estimator, attribute: str = "outcome_"):
    if not hasattr(estimator, attribute):
        raise UsageError(f"{type(estimator).__name__} is not fitted yet; call fit() first")
