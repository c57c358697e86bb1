"""Meta-algorithms that turn fixed-confidence learners into other kinds of learners.

* :func:`fc2fb_run` runs a strong FC learner in stages at doubly-exponentially
  growing failure rates under a per-stage budget cap, producing a fixed-budget
  answer.
* :func:`naive_fc2fb` is the same idea for known sample-complexity constants.
* :class:`FCW2SSession` boosts a weak FC learner by majority vote over
  parallel copies.
* :func:`fc2at_run` wraps FC2FB in doubling phases to get an anytime learner.

Factories expose ``make(conf, rng) -> FCSession``; see :mod:`bai_reductions.fc`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Protocol

import numpy as np

from .confidence import LogConfidence
from .env import RandomStream, Sampler
from .exceptions import UsageError
from .fc import FCSession, Stopped, drive

# child-stream keys
_SESSION, _REWARDS, _FALLBACK = 0, 1, 2


class FCFactory(Protocol):
    def make(self, conf: LogConfidence, rng: RandomStream) -> FCSession: ...


@dataclass(frozen=True)
class FC2FBSchedule:
    R: int
    B_prime: int
    ladder: tuple[int, ...]


def fc2fb_schedule(B: int, Q: int) -> FC2FBSchedule:
    """``R = floor(log2(B/Q))`` stages of ``floor(B/R)`` pulls, powers ``L_r = 2**(R-r)``."""
    if Q < 1:
        raise UsageError(f"Q must be >= 1, got {Q}")
    if 2 * Q > B:
        raise UsageError(f"need Q <= B/2, got Q={Q}, B={B}")
    # floor(log2(B/Q)) in integers: the largest R with Q * 2**R <= B
    R = (B // Q).bit_length() - 1
    B_prime = B // R
    ladder = tuple(2 ** (R - r) for r in range(1, R + 1))
    return FC2FBSchedule(R, B_prime, ladder)


@dataclass
class FC2FBResult:
    chosen: int
    pulls_used: int
    per_arm_pulls: np.ndarray
    stage: int | None
    """1-based stage that self-terminated, or ``None`` when the fallback arm was used."""
    stage_pulls: list[int] = field(default_factory=list)


def fc2fb(factory: FCFactory, sampler: Sampler, B: int, base_conf: LogConfidence, Q: int,
          rng: RandomStream) -> FC2FBResult:
    """FC2FB with its full pull ledger; :func:`fc2fb_run` returns only the arm."""
    if not base_conf.nats > 0:
        raise UsageError("base failure rate delta0 must be < 1")
    sched = fc2fb_schedule(B, Q)
    per_arm = np.zeros(sampler.K, dtype=np.int64)
    stage_pulls = []
    for r, L in enumerate(sched.ladder, start=1):
        session = factory.make(base_conf.power(L), rng.child(r, _SESSION))
        res = drive(session, sampler, rng.child(r, _REWARDS), limit=sched.B_prime)
        per_arm += res.per_arm_pulls
        stage_pulls.append(res.pulls)
        if isinstance(res.status, Stopped):
            return FC2FBResult(res.status.arm, int(per_arm.sum()), per_arm, r, stage_pulls)
    fallback = rng.child(0, _FALLBACK).integers(sampler.K)
    return FC2FBResult(fallback, int(per_arm.sum()), per_arm, None, stage_pulls)


def fc2fb_run(factory: FCFactory, sampler: Sampler, B: int, base_conf: LogConfidence, Q: int,
              rng: RandomStream) -> int:
    """Fixed-budget answer from a strong FC learner.

    Stage ``r`` runs a fresh session at ``delta0 ** L_r`` and force-terminates
    it after ``B'`` pulls. The first self-terminating stage's output is
    returned; if none terminates, an arm drawn uniformly at random.
    """
    return fc2fb(factory, sampler, B, base_conf, Q, rng).chosen


def naive_fc2fb(factory: FCFactory, sampler: Sampler, B: int, A: float, C: float,
                rng: RandomStream) -> int:
    """Single run at the ``delta_B`` solving ``B = A ln(1/delta_B) + C``, capped at ``B`` pulls."""
    if not A > 0:
        raise UsageError(f"A must be positive, got {A}")
    if not B > C:
        raise UsageError(f"need B > C, got B={B}, C={C}")
    conf = naive_confidence(B, A, C)
    session = factory.make(conf, rng.child(1, _SESSION))
    res = drive(session, sampler, rng.child(1, _REWARDS), limit=B)
    if isinstance(res.status, Stopped):
        return res.status.arm
    return rng.child(0, _FALLBACK).integers(sampler.K)


def naive_confidence(B: float, A: float, C: float) -> LogConfidence:
    return LogConfidence((B - C) / A)


# -- FCW2S -------------------------------------------------------------------

def fcw2s_required_trials(target_conf: LogConfidence, base_conf: LogConfidence) -> int:
    """Smallest ``L >= 4 ln(1/delta) / ln(1/(4 e delta0))``."""
    margin = base_conf.nats - 1.0 - math.log(4.0)
    # delta0 = 1/(4e) lands a rounding error above the boundary; treat it as on it
    if not margin > 1e-12 * base_conf.nats:
        raise UsageError("FCW2S needs delta0 < 1/(4e)")
    return math.ceil(4.0 * target_conf.nats / margin)


class FCW2SSession(FCSession):
    """``L`` weak-FC copies advanced fewest-pulls-first, then a majority vote.

    Pulls continue while at least ``floor(L/2)`` copies are running. Ties in
    the scheduler go to the lowest copy index and ties in the vote to the
    lowest arm index. A terminated copy receives no further samples.
    """

    def __init__(self, factory: FCFactory, L: int, base_conf: LogConfidence, K: int,
                 rng: RandomStream):
        super().__init__()
        if L < 2:
            raise UsageError(f"FCW2S needs L >= 2, got {L}")
        self.L = L
        self.K = K
        self.copies = [factory.make(base_conf, rng.child(l)) for l in range(L)]
        self.surviving = list(range(L))
        self.votes: dict[int, int] = {}
        self._cursor = 0
        self._check_loop()

    def _check_loop(self):
        if len(self.surviving) < self.L // 2:
            counts = np.zeros(self.K, dtype=np.int64)
            for l in range(self.L):
                if l not in self.surviving:
                    counts[self.votes[l]] += 1
            self._status = Stopped(int(np.argmax(counts)))

    def _want(self):
        # Copies before the cursor hold one pull more than those from it on, so
        # the cursor is the fewest-pulls copy with the lowest index.
        if self._cursor >= len(self.surviving):
            self._cursor = 0
        return self.copies[self.surviving[self._cursor]].next_arm(), 1

    def _absorb(self, arm, rewards):
        self._absorb_one(arm, float(rewards[0]))

    def _absorb_one(self, arm, reward):
        l = self.surviving[self._cursor]
        copy = self.copies[l]
        copy.observe(reward)
        if copy.stopped:
            self.votes[l] = copy.status().arm
            del self.surviving[self._cursor]
            self._check_loop()
        else:
            self._cursor += 1

    def spread(self) -> int:
        """Largest difference in pulls between two running copies."""
        p = [self.copies[l].pulls() for l in self.surviving]
        return max(p) - min(p) if p else 0


class FCW2SFactory:
    """Boosted sessions whose number of copies ``L`` follows the requested confidence.

    This turns a weak FC factory into one that can be handed to FC2FB.
    """

    def __init__(self, factory: FCFactory, base_conf: LogConfidence, K: int):
        self.factory = factory
        self.base_conf = base_conf
        self.K = K

    def make(self, conf: LogConfidence, rng: RandomStream) -> FCW2SSession:
        L = max(2, fcw2s_required_trials(conf, self.base_conf))
        return FCW2SSession(self.factory, L, self.base_conf, self.K, rng)


def fcw2s_run(factory: FCFactory, sampler: Sampler, L: int, base_conf: LogConfidence,
              rng: RandomStream) -> tuple[int, int]:
    """Run FCW2S to completion; returns ``(voted arm, total pulls across copies)``."""
    session = FCW2SSession(factory, L, base_conf, sampler.K, rng.child(_SESSION))
    reward_rng = rng.child(_REWARDS)
    while not session.stopped:
        arm = session.next_arm()
        session.observe(sampler.sample(arm, reward_rng))
    return session.status().arm, session.pulls()


# -- FC2AT -------------------------------------------------------------------

@dataclass(frozen=True)
class AnytimeTrace:
    """Piecewise-constant recommendations ``J_t`` for ``t = 1..horizon``.

    ``change_times[i]`` is the first global step at which ``recommendations[i]``
    holds; before the first change the recommendation is ``initial``.
    """

    horizon: int
    initial: int
    change_times: tuple[int, ...]
    recommendations: tuple[int, ...]

    def at(self, t: int) -> int:
        if not 1 <= t <= self.horizon:
            raise UsageError(f"t must lie in [1, {self.horizon}], got {t}")
        rec = self.initial
        for when, arm in zip(self.change_times, self.recommendations):
            if when > t:
                break
            rec = arm
        return rec

    @property
    def final(self) -> int:
        return self.at(self.horizon)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        rec = self.initial
        changes = dict(zip(self.change_times, self.recommendations))
        for t in range(1, self.horizon + 1):
            rec = changes.get(t, rec)
            yield t, rec


def fc2at_run(factory: FCFactory, sampler: Sampler, base_conf: LogConfidence, Q: int,
              horizon: int, rng: RandomStream) -> AnytimeTrace:
    """Anytime recommendations from FC2FB run in phases of ``T_i = 2**i * Q`` steps.

    A phase's answer exists once its last step has been played, so it is the
    recommendation from the following step on. Phases whose answer would
    arrive after ``horizon`` cannot affect the trace and are not run. Steps a
    phase does not spend inside FC2FB are idle padding and draw no rewards.
    """
    if horizon < 2 * Q:
        raise UsageError(f"need horizon >= 2Q, got horizon={horizon}, Q={Q}")
    times, recs = [], []
    end = 0
    i = 1
    while end + (2 ** i) * Q < horizon:
        T_i = (2 ** i) * Q
        end += T_i
        res = fc2fb(factory, sampler, T_i, base_conf, Q, rng.child(i))
        times.append(end + 1)
        recs.append(res.chosen)
        i += 1
    return AnytimeTrace(horizon, 0, tuple(times), tuple(recs))
