"""Fixed-confidence algorithms as pull/observe state machines.

A session is driven one pull at a time with :meth:`FCSession.next_arm` and
:meth:`FCSession.observe`, or in blocks with :meth:`FCSession.request` and
:meth:`FCSession.observe_many`. Both paths go through the same bookkeeping,
and a block of ``n`` rewards has the same effect as ``n`` single observations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .confidence import LogConfidence
from .env import RandomStream, Sampler
from .exceptions import ProtocolError, UsageError

#: guards against sessions that never make progress
MAX_PULLS = 1 << 62


@dataclass(frozen=True)
class Running:
    pass


@dataclass(frozen=True)
class Stopped:
    arm: int


RUNNING = Running()


class FCSession:
    """Base class for fixed-confidence learners.

    Subclasses implement ``_want`` (which arm next, and how many consecutive
    pulls of it they would accept) and ``_absorb`` (consume rewards for that
    arm), and set ``self._status`` to a :class:`Stopped` when done. They may
    override ``_absorb_one`` with a scalar fast path that has the same effect.
    """

    def __init__(self):
        self._status = RUNNING
        self._pulls = 0
        self._pending: tuple[int, int] | None = None

    def _want(self) -> tuple[int, int]:
        raise NotImplementedError

    def _absorb(self, arm: int, rewards: np.ndarray) -> None:
        raise NotImplementedError

    def _absorb_one(self, arm: int, reward: float) -> None:
        self._absorb(arm, np.array([reward], dtype=float))

    def _check_can_pull(self):
        if self._pending is not None:
            raise ProtocolError("next_arm called twice without an observe in between")
        if isinstance(self._status, Stopped):
            raise ProtocolError("session has stopped; no further pulls are accepted")
        if self._pulls >= MAX_PULLS:
            raise RuntimeError("session exceeded the safety cap on pulls")

    def next_arm(self) -> int:
        self._check_can_pull()
        arm, _ = self._want()
        self._pending = (arm, 1)
        return arm

    def request(self) -> tuple[int, int]:
        """Arm to pull and the largest block of consecutive pulls the session accepts."""
        self._check_can_pull()
        arm, n = self._want()
        self._pending = (arm, n)
        return arm, n

    def observe(self, reward: float) -> None:
        if self._pending is None:
            raise ProtocolError("observe called without a preceding next_arm")
        arm = self._pending[0]
        self._pending = None
        self._pulls += 1
        self._absorb_one(arm, float(reward))

    def observe_many(self, rewards) -> None:
        if self._pending is None:
            raise ProtocolError("observe called without a preceding next_arm")
        arm, limit = self._pending
        rewards = np.asarray(rewards, dtype=float)
        if not 1 <= rewards.size <= limit:
            raise ProtocolError(f"expected between 1 and {limit} rewards, got {rewards.size}")
        self._pending = None
        self._pulls += rewards.size
        self._absorb(arm, rewards)

    def status(self) -> Running | Stopped:
        return self._status

    def pulls(self) -> int:
        return self._pulls

    @property
    def stopped(self) -> bool:
        return isinstance(self._status, Stopped)


@dataclass
class DriveResult:
    pulls: int
    per_arm_pulls: np.ndarray
    status: Running | Stopped


def drive(session: FCSession, sampler: Sampler, rng: RandomStream, limit: int | None = None) -> DriveResult:
    """Feed ``session`` rewards from ``sampler`` until it stops or ``limit`` pulls are spent."""
    counts = np.zeros(sampler.K, dtype=np.int64)
    used = 0
    while not session.stopped and (limit is None or used < limit):
        arm, n = session.request()
        if limit is not None:
            n = min(n, limit - used)
        session.observe_many(sampler.sample_n(arm, n, rng))
        counts[arm] += n
        used += n
    return DriveResult(used, counts, session.status())


# -- PE-KHN ----------------------------------------------------------------

def pekhn_target_count(variance: float, eps: float, K: int, stage_conf: LogConfidence) -> int:
    """Cumulative per-arm sample target ``ceil(2 var / eps^2 * ln(K / delta_l))``."""
    if not eps > 0:
        raise UsageError(f"eps must be positive, got {eps}")
    if variance < 0:
        raise UsageError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return 0  # eps**2 underflows in very late stages
    return math.ceil(2.0 * variance / (eps * eps) * (math.log(K) + stage_conf.nats))


def pekhn_stage_conf(base_conf: LogConfidence, stage: int) -> LogConfidence:
    """``delta_l = delta / (l (l + 1))``."""
    if stage < 1:
        raise UsageError(f"stage must be >= 1, got {stage}")
    return LogConfidence(base_conf.nats + math.log(stage * (stage + 1)))


def pekhn_eliminate(means: Mapping[int, float], eps: float) -> list[int]:
    """Arms whose empirical mean exceeds ``max - 2 eps``; removal uses ``<=``."""
    if not means:
        raise UsageError("cannot eliminate from an empty set")
    top = max(means.values())
    threshold = top - 2.0 * eps
    return sorted(i for i, m in means.items() if not m <= threshold)


class PEKHNSession(FCSession):
    """Phased elimination with per-arm sample targets scaled by known variances.

    Samples accumulate across stages. Within a stage each active arm's deficit
    is served as one block, in increasing arm order.
    """

    def __init__(self, variances: Sequence[float], conf: LogConfidence):
        super().__init__()
        self.variances = np.asarray(variances, dtype=float)
        self.K = len(self.variances)
        if self.K < 2:
            raise UsageError(f"PE-KHN needs K >= 2 arms, got {self.K}")
        if np.any(self.variances < 0):
            raise UsageError("variances must be >= 0")
        self.conf = conf
        self.counts = np.zeros(self.K, dtype=np.int64)
        self.sums = np.zeros(self.K)
        self.active = list(range(self.K))
        self.stage = 0
        self.targets: dict[int, int] = {}
        self.history: list[list[int]] = []
        self._next_stage()

    @property
    def eps(self) -> float:
        return 2.0 ** -self.stage

    def _next_stage(self):
        self.stage += 1
        stage_conf = pekhn_stage_conf(self.conf, self.stage)
        eps = self.eps
        self.targets = {
            i: max(1, pekhn_target_count(self.variances[i], eps, self.K, stage_conf))
            for i in self.active
        }
        self._cursor = 0

    def _deficit_arm(self) -> int | None:
        # arms before the cursor have met this stage's target
        while self._cursor < len(self.active):
            i = self.active[self._cursor]
            if self.counts[i] < self.targets[i]:
                return i
            self._cursor += 1
        return None

    def _advance(self):
        # close every stage whose targets are already met
        while self._deficit_arm() is None:
            means = {i: self.sums[i] / self.counts[i] for i in self.active}
            self.active = pekhn_eliminate(means, self.eps)
            self.history.append(list(self.active))
            if len(self.active) == 1:
                self._status = Stopped(self.active[0])
                return
            self._next_stage()

    def _want(self):
        i = self._deficit_arm()
        return i, int(self.targets[i] - self.counts[i])

    def _absorb(self, arm, rewards):
        self.counts[arm] += rewards.size
        # left-to-right accumulation keeps block and single observations bit-identical
        self.sums[arm] = np.add.accumulate(np.concatenate(([self.sums[arm]], rewards)))[-1]
        if self.counts[arm] >= self.targets[arm]:
            self._advance()

    def _absorb_one(self, arm, reward):
        self.counts[arm] += 1
        self.sums[arm] = self.sums[arm] + reward
        if self.counts[arm] >= self.targets[arm]:
            self._advance()


def pekhn_session(K: int, variances: Sequence[float], conf: LogConfidence) -> PEKHNSession:
    if len(variances) != K:
        raise UsageError(f"expected {K} variances, got {len(variances)}")
    return PEKHNSession(variances, conf)


# -- scripted mock ----------------------------------------------------------

class ScriptedSession(FCSession):
    """Pulls arm 0 until ``stop_time`` pulls, then stops with a coin-flip answer.

    The answer is ``wrong_output`` with probability ``fail_prob`` and ``output``
    otherwise. ``stop_time=None`` never stops.
    """

    _CHUNK = 1 << 20

    def __init__(self, stop_time: int | None, output: int, fail_prob: float, wrong_output: int,
                 rng: RandomStream):
        super().__init__()
        if not 0.0 <= fail_prob <= 1.0:
            raise UsageError(f"fail_prob must lie in [0, 1], got {fail_prob}")
        if stop_time is not None and stop_time < 1:
            raise UsageError(f"stop_time must be >= 1, got {stop_time}")
        self.stop_time = stop_time
        self.output = output
        self.fail_prob = fail_prob
        self.wrong_output = wrong_output
        self.rng = rng

    def _want(self):
        if self.stop_time is None:
            return 0, self._CHUNK
        return 0, self.stop_time - self._pulls

    def _absorb(self, arm, rewards):
        if self.stop_time is not None and self._pulls >= self.stop_time:
            wrong = self.rng.uniform() < self.fail_prob
            self._status = Stopped(self.wrong_output if wrong else self.output)

    _absorb_one = _absorb


def scripted_session(stop_time: int | None, output: int, fail_prob: float, wrong_output: int,
                     rng: RandomStream) -> ScriptedSession:
    return ScriptedSession(stop_time, output, fail_prob, wrong_output, rng)


# -- factories -------------------------------------------------------------

class PEKHNFactory:
    """Builds PE-KHN sessions for a fixed vector of known variances."""

    def __init__(self, variances: Sequence[float]):
        self.variances = np.asarray(variances, dtype=float)

    def make(self, conf: LogConfidence, rng: RandomStream) -> PEKHNSession:
        return PEKHNSession(self.variances, conf)

    def __repr__(self):
        return f"PEKHNFactory(K={len(self.variances)})"


class ScriptedFactory:
    """Builds scripted sessions; ``stop_time`` and ``fail_prob`` may depend on the confidence."""

    def __init__(self, stop_time: int | None | Callable[[LogConfidence], int | None], output: int,
                 fail_prob: float | Callable[[LogConfidence], float] = 0.0, wrong_output: int = 1):
        self.stop_time = stop_time
        self.output = output
        self.fail_prob = fail_prob
        self.wrong_output = wrong_output

    def make(self, conf: LogConfidence, rng: RandomStream) -> ScriptedSession:
        stop = self.stop_time(conf) if callable(self.stop_time) else self.stop_time
        fail = self.fail_prob(conf) if callable(self.fail_prob) else self.fail_prob
        return ScriptedSession(stop, self.output, fail, self.wrong_output, rng)
