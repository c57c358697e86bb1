"""Closed-form guarantees, evaluated in log space where the inputs can be extreme.

Probability bounds are clamped to 1. Confidences are :class:`LogConfidence`
values, so failure rates far below double precision are fine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confidence import LogConfidence
from .env import BanditInstance
from .exceptions import UsageError


@dataclass(frozen=True)
class StrongFCConstants:
    """``T*_delta = A ln(1/delta) + C``."""

    A: float
    C: float = 0.0

    def __post_init__(self):
        if not self.A > 0:
            raise UsageError(f"A must be positive, got {self.A}")
        if self.C < 0:
            raise UsageError(f"C must be >= 0, got {self.C}")

    def sample_complexity(self, conf: LogConfidence) -> float:
        return self.A * conf.nats + self.C


def fb_error_to_sample_complexity(F: float, H: float, conf: LogConfidence, B0: int) -> int:
    """Budget after which ``F exp(-B/H) <= delta``, never below the warm-up ``B0``."""
    if F < 1 or not H > 0:
        raise UsageError(f"need F >= 1 and H > 0, got F={F}, H={H}")
    return max(math.ceil(H * (math.log(F) + conf.nats)), B0)


def fc2fb_denominator(B: float, A: float, base_conf: LogConfidence, Q: float) -> float:
    """``4Q / ln(1/delta0) + 4 log2(B/Q) A``."""
    return 4.0 * Q / base_conf.nats + 4.0 * math.log2(B / Q) * A


def fc2fb_error_bound(B: float, A: float, base_conf: LogConfidence, Q: float) -> float:
    """Misidentification bound of FC2FB for a strong FC learner with slope ``A``."""
    if base_conf.nats < math.log(2.0):
        raise UsageError("the bound needs delta0 <= 1/2")
    if not 1 <= Q <= B / 2:
        raise UsageError(f"need 1 <= Q <= B/2, got Q={Q}, B={B}")
    return min(1.0, 3.0 * math.exp(-B / fc2fb_denominator(B, A, base_conf, Q)))


def fc2fb_budget_threshold(consts: StrongFCConstants, base_conf: LogConfidence, Q: float) -> float:
    """Smallest budget for which the FC2FB bound is guaranteed to hold."""
    a = consts.A * base_conf.nats
    c1 = consts.C + 1.0
    return 2.0 * (a + c1) * math.log(2.0 * a / Q + 2.0 * c1 / Q)


def fc2fb_budget_sufficient(B: float, consts: StrongFCConstants, base_conf: LogConfidence,
                            Q: float) -> bool:
    return B >= fc2fb_budget_threshold(consts, base_conf, Q)


def _pekhn_term(var: float, gap: float, log_front: float) -> float:
    # 64 var / gap^2 * ln((4K (ln 2)^2 / delta) * ln^2(4/gap))
    return 64.0 * var / (gap * gap) * (log_front + 2.0 * math.log(math.log(4.0 / gap)))


def pekhn_sample_bound(instance: BanditInstance, conf: LogConfidence) -> int:
    """High-probability stopping time of PE-KHN, rounded up.

    The best arm's term uses the smallest suboptimal gap. Requires every
    suboptimal gap to be at most 1.
    """
    return math.ceil(pekhn_sample_complexity(instance, conf))


def pekhn_sample_complexity(instance: BanditInstance, conf: LogConfidence) -> float:
    """Unrounded value behind :func:`pekhn_sample_bound`."""
    gaps = instance.gaps
    var = instance.variances
    best = instance.best_arm
    sub = [j for j in range(instance.K) if j != best]
    if any(gaps[j] > 1 for j in sub):
        raise UsageError("PE-KHN's stopping bound needs every gap <= 1")
    log_front = math.log(4.0 * instance.K) + 2.0 * math.log(math.log(2.0)) + conf.nats
    total = _pekhn_term(var[best], min(gaps[j] for j in sub), log_front)
    total += sum(_pekhn_term(var[j], gaps[j], log_front) for j in sub)
    return total


def fcw2s_stop_bound(L: int, f_delta0: int) -> int:
    """``L f(delta0)``: with probability ``1 - delta`` FCW2S stops by then."""
    return L * f_delta0


def fc2at_threshold(consts: StrongFCConstants, base_conf: LogConfidence, Q: float) -> float:
    """``B* = max(FC2FB budget threshold, 2Q)``."""
    return max(fc2fb_budget_threshold(consts, base_conf, Q), 2.0 * Q)


def fc2at_error_bound(T: float, consts: StrongFCConstants, base_conf: LogConfidence, Q: float,
                      check_horizon: bool = True) -> float:
    """Misidentification bound of FC2AT at time ``T``."""
    if check_horizon:
        b_star = fc2at_threshold(consts, base_conf, Q)
        if T < max(4.0 * b_star - 2.0 * Q, 2.0 * Q):
            raise UsageError(f"the bound needs T >= max(4B* - 2Q, 2Q) = {4 * b_star - 2 * Q:.6g}")
    denom = 16.0 * Q / base_conf.nats + 16.0 * math.log2(T / Q) * consts.A
    return min(1.0, 3.0 * math.exp(-T / denom))


def fit_strong_constants(confs, stopping_quantiles) -> StrongFCConstants:
    """Least-squares ``(A, C)`` from stopping-time quantiles measured at several confidences."""
    x = np.array([c.nats for c in confs], dtype=float)
    y = np.asarray(stopping_quantiles, dtype=float)
    A, C = np.polyfit(x, y, 1)
    return StrongFCConstants(float(A), max(0.0, float(C)))
