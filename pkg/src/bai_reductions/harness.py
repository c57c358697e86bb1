"""Deterministic Monte Carlo experiments over fixed-budget algorithms.

Trial ``t`` of a cell runs on the stream seeded with
``mix64(master_seed, algorithm_id, axis_value, t)`` where ``algorithm_id`` is
the first 8 bytes of a BLAKE2b digest of the algorithm's canonical JSON spec.
A cell's result therefore never depends on which other cells exist, on the
order trials run in, or on the number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .env import (BanditInstance, RandomStream, best_arm, make_adversarial_shvar_instance,
                  make_figure_instance, mix64)
from .exceptions import InfeasibleInstanceError, UsageError
from .fb import ESTIMATORS, FixedBudgetEstimator, make_estimator

log = logging.getLogger(__name__)

CSV_COLUMNS = ["experiment_id", "algorithm", "axis_name", "axis_value", "K", "trials",
               "misid_count", "misid_prob", "ci_low", "ci_high"]

GENERATORS = ("figure", "adversarial", "explicit")


def wilson_ci(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1 or not 0 <= successes <= n:
        raise UsageError(f"need 0 <= successes <= n and n >= 1, got {successes}/{n}")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    lo, hi = max(0.0, center - half), min(1.0, center + half)
    # the closed form can land an ulp inside p at the boundaries
    return min(lo, p), max(hi, p)


# -- configuration -----------------------------------------------------------

@dataclass
class AlgorithmSpec:
    name: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise UsageError(f"unknown algorithm {self.name!r}; choose from {sorted(ESTIMATORS)}")
        if "budget" in self.params:
            raise UsageError("the budget comes from the sweep, not the algorithm parameters")

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({inner})"

    @property
    def key(self) -> int:
        doc = json.dumps({"name": self.name, "params": self.params}, sort_keys=True)
        return int.from_bytes(hashlib.blake2b(doc.encode(), digest_size=8).digest(), "little")

    def estimator(self, budget: int) -> FixedBudgetEstimator:
        return make_estimator(self.name, budget=budget, **self.params)


@dataclass
class InstanceSpec:
    """How to build the bandit for a cell.

    ``figure`` params: ``gap2, gap_rest, var_lo, var_hi`` (and ``K`` for budget
    sweeps). ``adversarial`` params: ``K`` and optionally ``budget`` (defaults
    to the cell budget). ``explicit`` params: ``arms`` as in the instance file.
    """

    generator: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise UsageError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")

    def build(self, K: int | None = None, budget: int | None = None, trial: int | None = None) -> BanditInstance:
        p = dict(self.params)
        if K is not None:
            p["K"] = K
        if self.generator == "explicit":
            inst = BanditInstance.from_dict({"arms": p["arms"]})
            if K is not None and inst.K != K:
                raise UsageError("an explicit instance cannot be swept over K")
            return inst
        if "K" not in p:
            raise UsageError(f"{self.generator} instances need K")
        K = int(p["K"])
        if self.generator == "adversarial":
            b = p.get("budget", budget)
            if b is None:
                raise UsageError("adversarial instances need a budget")
            return make_adversarial_shvar_instance(K, int(b))
        keys = (K,) if trial is None else (K, trial)
        rng = RandomStream(mix64(self.seed, *keys))
        return make_figure_instance(K, float(p["gap2"]), float(p["gap_rest"]),
                                    float(p["var_lo"]), float(p["var_hi"]), rng)


@dataclass
class ExperimentConfig:
    experiment_id: str
    instance: InstanceSpec
    algorithms: list[AlgorithmSpec]
    axis: str
    values: list[int]
    trials: int
    master_seed: int
    budget: int | None = None
    """Fixed budget for arm sweeps."""
    resample_per_trial: bool = False

    def __post_init__(self):
        if self.axis not in ("budget", "K"):
            raise UsageError(f"sweep axis must be 'budget' or 'K', got {self.axis!r}")
        if not self.values:
            raise UsageError("the sweep axis is empty")
        if not self.algorithms:
            raise UsageError("no algorithms given")
        if self.trials < 1:
            raise UsageError(f"trials must be >= 1, got {self.trials}")
        if self.axis == "K" and self.budget is None:
            raise UsageError("an arm sweep needs a fixed budget")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            inst = doc["instance"]
            sweep = doc["sweep"]
            return cls(
                experiment_id=str(doc.get("experiment_id", "experiment")),
                instance=InstanceSpec(inst["generator"], dict(inst.get("params", {})), int(inst.get("seed", 0))),
                algorithms=[AlgorithmSpec(a["name"], dict(a.get("params", {}))) for a in doc["algorithms"]],
                axis=sweep["axis"],
                values=[int(v) for v in sweep["values"]],
                budget=None if sweep.get("budget") is None else int(sweep["budget"]),
                trials=int(doc["trials"]),
                master_seed=int(doc["master_seed"]),
                resample_per_trial=bool(doc.get("resample_per_trial", False)),
            )
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed experiment config: missing or bad field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "instance": asdict(self.instance),
            "algorithms": [asdict(a) for a in self.algorithms],
            "sweep": {"axis": self.axis, "values": list(self.values), "budget": self.budget},
            "trials": self.trials,
            "master_seed": self.master_seed,
            "resample_per_trial": self.resample_per_trial,
        }


@dataclass
class CellSummary:
    algorithm: str
    axis_name: str
    axis_value: int
    K: int
    trials: int
    misid_count: int
    misid_prob: float
    ci_low: float
    ci_high: float
    experiment_id: str = ""
    skipped: str | None = None

    @classmethod
    def from_count(cls, algorithm, axis_name, axis_value, K, trials, misid_count, experiment_id=""):
        lo, hi = wilson_ci(misid_count, trials)
        return cls(algorithm, axis_name, axis_value, K, trials, misid_count,
                   misid_count / trials, lo, hi, experiment_id)

    @classmethod
    def skipped_cell(cls, algorithm, axis_name, axis_value, K, trials, reason, experiment_id=""):
        nan = float("nan")
        return cls(algorithm, axis_name, axis_value, K, trials, 0, nan, nan, nan, experiment_id, reason)


# -- execution ---------------------------------------------------------------

def trial_seed(master_seed: int, algorithm_key: int, axis_value: int, t: int) -> int:
    return mix64(master_seed, algorithm_key, axis_value, t)


def _count_misid(task) -> int:
    est, instance, inst_spec, K, budget, master_seed, key, axis_value, start, stop = task
    wrong = 0
    for t in range(start, stop):
        if inst_spec is not None:
            instance = inst_spec.build(K=K, budget=budget, trial=t)
        truth = best_arm(instance)
        rng = RandomStream(trial_seed(master_seed, key, axis_value, t))
        if est.fit_predict(instance, rng) != truth:
            wrong += 1
    return wrong


def default_workers() -> int:
    env = os.environ.get("BAI_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"BAI_THREADS must be an integer, got {env!r}") from None
        if n >= 1:
            return n
    return os.cpu_count() or 1


def run_cell(instance: BanditInstance, algorithm: AlgorithmSpec, budget: int, trials: int,
             master_seed: int, axis_name: str = "budget", axis_value: int | None = None,
             workers: int = 1, experiment_id: str = "", resample: InstanceSpec | None = None,
             executor: ProcessPoolExecutor | None = None) -> CellSummary:
    """Misidentification rate of one algorithm at one budget over ``trials`` seeded trials.

    Infeasible configurations come back as a skipped cell with a reason.
    ``resample`` rebuilds the instance for every trial from that spec.
    """
    if trials < 1:
        raise UsageError(f"trials must be >= 1, got {trials}")
    if axis_value is None:
        axis_value = budget
    K = instance.K
    est = algorithm.estimator(budget)
    reason = est.infeasibility(K, instance.variances if est.needs_variances else None)
    if reason is not None:
        return CellSummary.skipped_cell(algorithm.label, axis_name, axis_value, K, trials, reason, experiment_id)

    n_chunks = max(1, min(trials, workers * 4)) if workers > 1 else 1
    bounds = [trials * i // n_chunks for i in range(n_chunks + 1)]
    tasks = [(est, instance, resample, K, budget, master_seed, algorithm.key, axis_value, a, b)
             for a, b in zip(bounds, bounds[1:]) if b > a]
    if workers > 1 and len(tasks) > 1:
        if executor is not None:
            wrong = sum(executor.map(_count_misid, tasks))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                wrong = sum(pool.map(_count_misid, tasks))
    else:
        wrong = sum(map(_count_misid, tasks))
    return CellSummary.from_count(algorithm.label, axis_name, axis_value, K, trials, wrong, experiment_id)


def _sweep(config: ExperimentConfig, workers: int) -> list[CellSummary]:
    rows = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for value in config.values:
            budget = value if config.axis == "budget" else config.budget
            K_arg = value if config.axis == "K" else None
            try:
                instance = config.instance.build(K=K_arg, budget=budget)
            except (UsageError, InfeasibleInstanceError) as exc:
                K_label = K_arg if K_arg is not None else int(config.instance.params.get("K", 0))
                for algo in config.algorithms:
                    rows.append(CellSummary.skipped_cell(algo.label, config.axis, value, K_label,
                                                         config.trials, str(exc), config.experiment_id))
                continue
            resample = config.instance if config.resample_per_trial else None
            for algo in config.algorithms:
                cell = run_cell(instance, algo, budget, config.trials, config.master_seed,
                                axis_name=config.axis, axis_value=value, workers=workers,
                                experiment_id=config.experiment_id, resample=resample, executor=pool)
                log.info("%s %s=%s misid=%s", cell.algorithm, config.axis, value, cell.misid_prob)
                rows.append(cell)
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def budget_sweep(config: ExperimentConfig, workers: int = 1) -> list[CellSummary]:
    """Algorithms x budgets on one instance built once from the instance seed."""
    if config.axis != "budget":
        raise UsageError("budget_sweep needs a config with axis 'budget'")
    return _sweep(config, workers)


def arm_sweep(config: ExperimentConfig, workers: int = 1) -> list[CellSummary]:
    """Algorithms x K at a fixed budget; the instance is rebuilt from (seed, K)."""
    if config.axis != "K":
        raise UsageError("arm_sweep needs a config with axis 'K'")
    return _sweep(config, workers)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> list[CellSummary]:
    return budget_sweep(config, workers) if config.axis == "budget" else arm_sweep(config, workers)


# -- export ------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def to_csv(table: Sequence[CellSummary]) -> str:
    """CSV of the non-skipped cells; reals carry 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in table:
        if c.skipped is not None:
            continue
        w.writerow([c.experiment_id, c.algorithm, c.axis_name, c.axis_value, c.K, c.trials,
                    c.misid_count, _fmt(c.misid_prob), _fmt(c.ci_low), _fmt(c.ci_high)])
    return buf.getvalue()


def from_csv(text: str) -> list[CellSummary]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(CellSummary(
            algorithm=r["algorithm"], axis_name=r["axis_name"], axis_value=int(r["axis_value"]),
            K=int(r["K"]), trials=int(r["trials"]), misid_count=int(r["misid_count"]),
            misid_prob=float(r["misid_prob"]), ci_low=float(r["ci_low"]), ci_high=float(r["ci_high"]),
            experiment_id=r["experiment_id"]))
    return rows


def to_structured(table: Sequence[CellSummary]) -> list[dict]:
    return [asdict(c) for c in table]


def export(table: Sequence[CellSummary], format: str = "csv") -> str:
    if format == "csv":
        return to_csv(table)
    if format == "structured":
        return json.dumps(to_structured(table), indent=2, allow_nan=True)
    raise UsageError(f"unknown export format {format!r}")


def metadata(config: ExperimentConfig, table: Sequence[CellSummary], wall_time: float,
             workers: int) -> dict:
    return {
        "config": config.to_dict(),
        "library_version": __version__,
        "wall_time_seconds": wall_time,
        "workers": workers,
        "cells": sum(c.skipped is None for c in table),
        "skipped": [
            {"algorithm": c.algorithm, "axis_name": c.axis_name, "axis_value": c.axis_value,
             "K": c.K, "reason": c.skipped}
            for c in table if c.skipped is not None
        ],
    }


def metadata_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".meta.json")


def write_results(table: Sequence[CellSummary], config: ExperimentConfig, csv_path: Path,
                  wall_time: float, workers: int) -> Path:
    """Write the CSV and its sibling metadata document; returns the metadata path."""
    csv_path = Path(csv_path)
    meta_path = metadata_path(csv_path)
    csv_path.write_text(to_csv(table), encoding="utf-8")
    meta_path.write_text(json.dumps(metadata(config, table, wall_time, workers), indent=2),
                         encoding="utf-8")
    return meta_path


def timed_run(config: ExperimentConfig, workers: int = 1) -> tuple[list[CellSummary], float]:
    t0 = time.perf_counter()
    table = run_experiment(config, workers)
    return table, time.perf_counter() - t0
