"""Fixed-budget best-arm identification.

Functional cores (:func:`sh_run`, :func:`shvar_run`, :func:`uniform_fb_run`,
:func:`fc2fb_as_fb`) plus estimator wrappers that carry their configuration
through ``get_params``/``set_params`` so the harness can clone them::

    est = SequentialHalving(budget=6000).fit(instance, seed=3)
    est.best_arm_
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .confidence import LogConfidence
from .env import RandomStream, Sampler
from .exceptions import UsageError
from .fc import PEKHNFactory
from .reductions import FCFactory, fc2fb
from .validation import check_bandit, check_count, check_fitted, check_random_stream

# shares this close below an integer count as that integer
_FLOOR_RTOL = 1e-12


@dataclass
class FBOutcome:
    chosen: int
    pulls_used: int
    per_arm_pulls: np.ndarray

    def __post_init__(self):
        self.per_arm_pulls = np.asarray(self.per_arm_pulls, dtype=np.int64)


def n_rounds(K: int) -> int:
    """``ceil(log2 K)`` computed exactly."""
    return (K - 1).bit_length()


def _top_half(arms: np.ndarray, means: np.ndarray) -> np.ndarray:
    # keep ceil(n/2) by mean; equal means keep the lower index
    order = np.lexsort((arms, -means))
    keep = (len(arms) + 1) // 2
    return np.sort(arms[order[:keep]])


def _argmax_lowest(values: np.ndarray) -> int:
    return int(np.argmax(values))


def sh_min_budget(K: int) -> int:
    return K * n_rounds(K)


def sh_run(B: int, K: int, sampler: Sampler, rng: RandomStream) -> FBOutcome:
    """Sequential halving with fresh empirical means each round.

    Each of the ``ceil(log2 K)`` rounds pulls every survivor
    ``floor(B / (|S| ceil(log2 K)))`` times and keeps the top half (rounded up).
    """
    if B < sh_min_budget(K):
        raise UsageError(f"SH needs B >= K*ceil(log2 K) = {sh_min_budget(K)}, got {B}")
    rounds = n_rounds(K)
    active = np.arange(K)
    per_arm = np.zeros(K, dtype=np.int64)
    for _ in range(rounds):
        n = B // (len(active) * rounds)
        rewards = sampler.sample_block(active, n, rng)
        per_arm[active] += n
        active = _top_half(active, rewards.mean(axis=1))
    return FBOutcome(int(active[0]), int(per_arm.sum()), per_arm)


def shvar_allocation(round_budget: int, variances: np.ndarray) -> np.ndarray:
    """Variance-proportional split of one round's budget.

    Shares are floored with a minimum of one pull; the remainder is left
    unspent. If the one-pull minimum overdraws the round, the excess is taken
    from the largest allocations.
    """
    v = np.asarray(variances, dtype=float)
    share = round_budget * v / v.sum()
    alloc = np.floor(share * (1 + _FLOOR_RTOL)).astype(np.int64)
    alloc = np.maximum(alloc, 1)
    excess = int(alloc.sum()) - round_budget
    while excess > 0:
        j = int(np.argmax(alloc))
        take = min(excess, int(alloc[j]) - 1)
        if take <= 0:
            raise UsageError("round budget is smaller than the number of active arms")
        alloc[j] -= take
        excess -= take
    return alloc


def shvar_run(B: int, K: int, variances, sampler: Sampler, rng: RandomStream,
              cumulative: bool = True) -> FBOutcome:
    """Sequential halving with samples split in proportion to the known variances.

    Each round spends ``floor(B / ceil(log2 K))`` pulls via
    :func:`shvar_allocation` and drops the bottom ``floor(|S|/2)`` arms by
    empirical mean (cumulative over the run unless ``cumulative=False``);
    equal means drop the higher index first.
    """
    variances = np.asarray(variances, dtype=float)
    if len(variances) != K:
        raise UsageError(f"expected {K} variances, got {len(variances)}")
    if np.any(variances <= 0):
        raise UsageError("SHVar needs strictly positive variances")
    if B < sh_min_budget(K):
        raise UsageError(f"SHVar needs B >= K*ceil(log2 K) = {sh_min_budget(K)}, got {B}")
    rounds = n_rounds(K)
    round_budget = B // rounds
    active = np.arange(K)
    per_arm = np.zeros(K, dtype=np.int64)
    sums = np.zeros(K)
    for _ in range(rounds):
        alloc = shvar_allocation(round_budget, variances[active])
        rewards = sampler.sample_counts(active, alloc, rng)
        starts = np.concatenate(([0], np.cumsum(alloc)[:-1]))
        round_sums = np.add.reduceat(rewards, starts)
        if cumulative:
            sums[active] += round_sums
            per_arm[active] += alloc
            means = sums[active] / per_arm[active]
        else:
            per_arm[active] += alloc
            means = round_sums / alloc
        active = _top_half(active, means)
    return FBOutcome(int(active[0]), int(per_arm.sum()), per_arm)


def uniform_fb_run(B: int, K: int, sampler: Sampler, rng: RandomStream) -> FBOutcome:
    """``floor(B/K)`` pulls per arm, then the empirical argmax."""
    if B < K:
        raise UsageError(f"uniform allocation needs B >= K = {K}, got {B}")
    n = B // K
    rewards = sampler.sample_block(np.arange(K), n, rng)
    per_arm = np.full(K, n, dtype=np.int64)
    return FBOutcome(_argmax_lowest(rewards.mean(axis=1)), int(per_arm.sum()), per_arm)


class FC2FBAlgorithm:
    """An FC factory viewed as a fixed-budget algorithm."""

    def __init__(self, factory: FCFactory, base_conf: LogConfidence, Q: int):
        self.factory = factory
        self.base_conf = base_conf
        self.Q = Q

    def run(self, B: int, sampler: Sampler, rng: RandomStream) -> FBOutcome:
        res = fc2fb(self.factory, sampler, B, self.base_conf, self.Q, rng)
        return FBOutcome(res.chosen, res.pulls_used, res.per_arm_pulls)


def fc2fb_as_fb(factory: FCFactory, base_conf: LogConfidence, Q: int) -> FC2FBAlgorithm:
    return FC2FBAlgorithm(factory, base_conf, Q)


# -- estimators --------------------------------------------------------------

class FixedBudgetEstimator(BaseEstimator):
    """Common ``fit``/``predict`` plumbing; subclasses implement ``_run``."""

    #: whether the algorithm reads the per-arm variances
    needs_variances = False

    def infeasibility(self, K: int, variances=None) -> str | None:
        """Reason this configuration cannot run on K arms, or ``None``."""
        return None

    def fit(self, bandit, seed):
        sampler, variances = check_bandit(bandit)
        check_count(self.budget, "budget")
        if self.needs_variances and variances is None:
            raise UsageError(f"{type(self).__name__} needs the instance variances, not a bare Sampler")
        rng = check_random_stream(seed)
        self.outcome_ = self._run(sampler, variances, rng)
        self.best_arm_ = self.outcome_.chosen
        return self

    def predict(self) -> int:
        check_fitted(self)
        return self.best_arm_

    def fit_predict(self, bandit, seed) -> int:
        return self.fit(bandit, seed).best_arm_


class SequentialHalving(FixedBudgetEstimator):
    def __init__(self, budget: int = 1000):
        self.budget = budget

    def infeasibility(self, K, variances=None):
        if self.budget < sh_min_budget(K):
            return f"budget {self.budget} < K*ceil(log2 K) = {sh_min_budget(K)}"
        return None

    def _run(self, sampler, variances, rng):
        return sh_run(self.budget, sampler.K, sampler, rng)


class SHVar(FixedBudgetEstimator):
    """Variance-aware sequential halving; ``cumulative=False`` ranks on per-round means."""

    needs_variances = True

    def __init__(self, budget: int = 1000, cumulative: bool = True):
        self.budget = budget
        self.cumulative = cumulative

    def infeasibility(self, K, variances=None):
        if self.budget < sh_min_budget(K):
            return f"budget {self.budget} < K*ceil(log2 K) = {sh_min_budget(K)}"
        if variances is not None and np.any(np.asarray(variances) <= 0):
            return "SHVar needs strictly positive variances"
        return None

    def _run(self, sampler, variances, rng):
        return shvar_run(self.budget, sampler.K, variances, sampler, rng, cumulative=self.cumulative)


class UniformAllocation(FixedBudgetEstimator):
    def __init__(self, budget: int = 1000):
        self.budget = budget

    def infeasibility(self, K, variances=None):
        if self.budget < K:
            return f"budget {self.budget} < K = {K}"
        return None

    def _run(self, sampler, variances, rng):
        return uniform_fb_run(self.budget, sampler.K, sampler, rng)


class FC2FB(FixedBudgetEstimator):
    """FC2FB around a fixed-confidence factory; PE-KHN on the instance variances by default.

    ``delta0_nats`` is ``ln(1/delta0)``, so the default 1.0 means ``delta0 = 1/e``.
    """

    def __init__(self, budget: int = 1000, delta0_nats: float = 1.0, q: int = 1, factory=None):
        self.budget = budget
        self.delta0_nats = delta0_nats
        self.q = q
        self.factory = factory

    @property
    def needs_variances(self):
        return self.factory is None

    def infeasibility(self, K, variances=None):
        if self.q < 1 or 2 * self.q > self.budget:
            return f"need 1 <= q <= budget/2, got q={self.q}, budget={self.budget}"
        if not self.delta0_nats > 0:
            return "delta0 must be < 1"
        return None

    def _run(self, sampler, variances, rng):
        factory = self.factory if self.factory is not None else PEKHNFactory(variances)
        algo = fc2fb_as_fb(factory, LogConfidence(float(self.delta0_nats)), self.q)
        return algo.run(self.budget, sampler, rng)


ESTIMATORS = {
    "sh": SequentialHalving,
    "shvar": SHVar,
    "uniform": UniformAllocation,
    "fc2fb_pekhn": FC2FB,
}


def make_estimator(name: str, **params) -> FixedBudgetEstimator:
    try:
        cls = ESTIMATORS[name]
    except KeyError:
        raise UsageError(f"unknown algorithm {name!r}; choose from {sorted(ESTIMATORS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise UsageError(f"bad parameters for {name}: {exc}") from None
