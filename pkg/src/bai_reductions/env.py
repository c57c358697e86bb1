"""Gaussian bandit instances, reward sampling and the seeding contract.

Every random draw in the package goes through :class:`RandomStream`, a thin
wrapper around a PCG64 generator whose state is a pure function of a 64-bit
seed. Child streams are derived with :func:`mix64`, so independent consumers
(stages of a reduction, trials of an experiment) never share a stream.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InfeasibleInstanceError, InvalidInstanceError, UsageError

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 output function."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(seed: int, *keys: int) -> int:
    """Fold integer keys into a 64-bit seed.

    ``h = splitmix64(seed)``, then for each key ``h = splitmix64(h ^ splitmix64(key))``.
    Keys are reduced modulo 2**64, so negative keys are accepted.
    """
    h = splitmix64(seed & MASK64)
    for k in keys:
        h = splitmix64(h ^ splitmix64(int(k) & MASK64))
    return h


class RandomStream:
    """Seeded source of standard-normal, uniform and integer draws.

    A stream is owned by one sequential consumer. Drawing ``n`` normals at once
    consumes the generator exactly as ``n`` scalar draws would, which lets the
    samplers batch without changing results.
    """

    __slots__ = ("seed", "_gen")

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def normal(self) -> float:
        return float(self._gen.standard_normal())

    def normals(self, n) -> np.ndarray:
        return self._gen.standard_normal(n)

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n) -> np.ndarray:
        return self._gen.random(n)

    def integers(self, high: int) -> int:
        """Uniform integer in ``[0, high)``."""
        return int(self._gen.integers(high))

    def child(self, *keys: int) -> "RandomStream":
        """Independent stream derived from this stream's seed and ``keys``.

        Does not advance this stream.
        """
        return RandomStream(mix64(self.seed, *keys))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed})"


@dataclass(frozen=True)
class GaussianArm:
    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise InvalidInstanceError(f"arm mean must be finite, got {self.mean!r}")
        if not (self.variance >= 0 and math.isfinite(self.variance)):
            raise InvalidInstanceError(f"arm variance must be finite and >= 0, got {self.variance!r}")


@dataclass(frozen=True)
class BanditInstance:
    """K Gaussian arms with known variances and a unique best arm."""

    arms: tuple[GaussianArm, ...]

    def __post_init__(self):
        arms = tuple(self.arms)
        object.__setattr__(self, "arms", arms)
        if len(arms) < 2:
            raise UsageError(f"an instance needs K >= 2 arms, got {len(arms)}")
        best_arm(self)  # raises on ties

    @classmethod
    def from_arrays(cls, means: Sequence[float], variances: Sequence[float]) -> "BanditInstance":
        if len(means) != len(variances):
            raise UsageError("means and variances must have the same length")
        return cls(tuple(GaussianArm(float(m), float(v)) for m, v in zip(means, variances)))

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> np.ndarray:
        return np.array([a.mean for a in self.arms])

    @property
    def variances(self) -> np.ndarray:
        return np.array([a.variance for a in self.arms])

    @property
    def gaps(self) -> np.ndarray:
        m = self.means
        return m.max() - m

    @property
    def best_arm(self) -> int:
        return best_arm(self)

    def sampler(self) -> "Sampler":
        return Sampler(self)

    def to_dict(self) -> dict:
        return {"arms": [{"mean": a.mean, "variance": a.variance} for a in self.arms]}

    @classmethod
    def from_dict(cls, doc: dict) -> "BanditInstance":
        try:
            arms = doc["arms"]
            return cls(tuple(GaussianArm(float(a["mean"]), float(a["variance"])) for a in arms))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed instance document: {exc}") from exc

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "BanditInstance":
        return cls.from_dict(json.loads(text))


class Sampler:
    """Reward source over an instance that does not expose the variances.

    Algorithms that must not know the noise levels (SH, uniform allocation)
    are handed a ``Sampler`` rather than the instance.
    """

    __slots__ = ("K", "_means", "_sds")

    def __init__(self, instance: BanditInstance):
        self.K = instance.K
        self._means = instance.means
        self._sds = np.sqrt(instance.variances)

    def _check(self, arm):
        if not 0 <= arm < self.K:
            raise UsageError(f"arm index {arm} out of range [0, {self.K})")

    def sample(self, arm: int, rng: RandomStream) -> float:
        self._check(arm)
        return float(self._means[arm] + self._sds[arm] * rng.normal())

    def sample_n(self, arm: int, n: int, rng: RandomStream) -> np.ndarray:
        """``n`` consecutive rewards of one arm; same draws as ``n`` calls of :meth:`sample`."""
        self._check(arm)
        return self._means[arm] + self._sds[arm] * rng.normals(n)

    def sample_block(self, arms: np.ndarray, n: int, rng: RandomStream) -> np.ndarray:
        """``(len(arms), n)`` rewards, drawn arm after arm in the given order."""
        arms = np.asarray(arms)
        z = rng.normals((len(arms), n))
        return self._means[arms, None] + self._sds[arms, None] * z

    def sample_counts(self, arms: np.ndarray, counts: np.ndarray, rng: RandomStream) -> np.ndarray:
        """Flat rewards: ``counts[j]`` pulls of ``arms[j]``, arm after arm."""
        arms = np.asarray(arms)
        idx = np.repeat(arms, counts)
        return self._means[idx] + self._sds[idx] * rng.normals(idx.size)


def sample_reward(instance: BanditInstance, arm: int, rng: RandomStream) -> float:
    """Draw one reward ``mean + sqrt(variance) * z`` for ``arm``."""
    if not 0 <= arm < instance.K:
        raise UsageError(f"arm index {arm} out of range [0, {instance.K})")
    a = instance.arms[arm]
    return a.mean + math.sqrt(a.variance) * rng.normal()


def best_arm(instance: BanditInstance) -> int:
    means = [a.mean for a in instance.arms]
    top = max(means)
    winners = [i for i, m in enumerate(means) if m == top]
    if len(winners) != 1:
        raise InvalidInstanceError(f"best arm is not unique: arms {winners} share mean {top}")
    return winners[0]


def make_figure_instance(K: int, gap2: float, gap_rest: float, var_lo: float, var_hi: float,
                         rng: RandomStream) -> BanditInstance:
    """Best arm at mean 1, arm 2 at ``1 - gap2``, the rest at ``1 - gap_rest``.

    Variances are drawn uniformly from ``[var_lo, var_hi]`` in arm order.
    """
    if K < 2:
        raise UsageError(f"K must be >= 2, got {K}")
    if not (gap2 > 0 and gap_rest > 0):
        raise UsageError("gaps must be positive")
    if var_lo > var_hi or var_lo < 0:
        raise UsageError(f"need 0 <= var_lo <= var_hi, got [{var_lo}, {var_hi}]")
    means = [1.0, 1.0 - gap2] + [1.0 - gap_rest] * (K - 2)
    u = rng.uniforms(K)
    variances = var_lo + (var_hi - var_lo) * u
    return BanditInstance.from_arrays(means, variances.tolist())


def make_adversarial_shvar_instance(K: int, B: int) -> BanditInstance:
    """Instance on which variance-proportional allocation samples the near-optimal arms once.

    Arms ``0..K-2`` get variance ``1 / (B/log2(K) - (K-1))`` and the last arm
    variance 1; every suboptimal gap equals that arm's standard deviation.
    The near-optimal standard deviation is snapped to the grid on which
    ``1 - (1 - d)`` is exact, so ``gap == sqrt(variance)`` holds bit for bit.
    """
    if K < 2:
        raise UsageError(f"K must be >= 2, got {K}")
    denom = B / math.log2(K) - (K - 1)
    if not denom > 0:
        raise InfeasibleInstanceError(
            f"B/log2(K) - (K-1) = {denom} must be positive (K={K}, B={B})")
    d = math.sqrt(1.0 / denom)
    m = 1.0 - d
    d = 1.0 - m
    var_near = d * d
    means = [1.0] + [m] * (K - 2) + [0.0]
    variances = [var_near] * (K - 1) + [1.0]
    return BanditInstance.from_arrays(means, variances)

