"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 sweep finished with skipped cells,
4 I/O error. Nothing is written when the exit code is 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import theory
from .confidence import LogConfidence
from .env import BanditInstance, RandomStream, make_adversarial_shvar_instance, make_figure_instance
from .exceptions import InfeasibleInstanceError, InvalidInstanceError, UsageError
from .fb import ESTIMATORS, make_estimator
from .reductions import fcw2s_required_trials
from .harness import (AlgorithmSpec, ExperimentConfig, InstanceSpec, default_workers, timed_run,
                      write_results)

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _conf(args, name: str, default_nats: float | None = None) -> LogConfidence:
    """Read ``--NAME`` (a probability) or ``--NAME-nats`` (ln of its inverse)."""
    delta = getattr(args, name, None)
    nats = getattr(args, f"{name}_nats", None)
    if delta is not None and nats is not None:
        raise UsageError(f"give only one of --{name} and --{name}-nats")
    if nats is not None:
        return LogConfidence(nats)
    if delta is not None:
        return LogConfidence.from_delta(delta)
    if default_nats is None:
        raise UsageError(f"missing --{name} or --{name}-nats")
    return LogConfidence(default_nats)


def _add_conf(p, name: str, help_: str):
    flag = name.replace("_", "-")
    p.add_argument(f"--{flag}", dest=name, type=float, help=f"{help_} as a probability")
    p.add_argument(f"--{flag}-nats", dest=f"{name}_nats", type=float, help=f"{help_} as ln(1/delta)")


def _add_instance_flags(p, with_k: bool = True):
    p.add_argument("--gen", choices=["figure", "adversarial", "explicit"], default="figure")
    if with_k:
        p.add_argument("--k", type=int)
    p.add_argument("--gap2", type=float, default=0.1)
    p.add_argument("--gap-rest", type=float, default=0.8)
    p.add_argument("--var", type=_range, default=(1.0, 2.0), help="variance range LO:HI")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bai", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("instance", help="write a bandit instance document")
    _add_instance_flags(p)
    p.add_argument("--budget", type=int, help="budget the adversarial instance is built for")
    p.add_argument("--means", type=_floats)
    p.add_argument("--variances", type=_floats)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=Path, help="output path (default: standard output)")

    p = sub.add_parser("run", help="one fixed-budget run on an instance file")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--algo", choices=sorted(ESTIMATORS), required=True)
    p.add_argument("--budget", type=int, required=True)
    _add_conf(p, "delta0", "FC2FB base failure rate")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--per-round-means", action="store_true", help="SHVar: rank on per-round means")
    p.add_argument("--seed", type=int, required=True)

    for name, axis in (("sweep-budget", "budget"), ("sweep-arms", "K")):
        p = sub.add_parser(name, help=f"misidentification sweep over {axis}")
        p.add_argument("--config", type=Path, help="JSON experiment config")
        _add_instance_flags(p, with_k=(axis == "budget"))
        p.add_argument("--instance-seed", type=int, default=0)
        if axis == "budget":
            p.add_argument("--budgets", type=_ints)
        else:
            p.add_argument("--ks", type=_ints)
            p.add_argument("--budget", type=int)
        p.add_argument("--algos", default="fc2fb_pekhn,sh,shvar",
                       help="comma-separated algorithm names")
        p.add_argument("--trials", type=int)
        p.add_argument("--experiment-id")
        p.add_argument("--seed", type=int, help="master seed (required unless the config sets one)")
        p.add_argument("--threads", type=int, help="worker count (default: $BAI_THREADS or CPU count)")
        p.add_argument("--out", type=Path, required=True, help="CSV path; metadata goes next to it")
        p.set_defaults(axis=axis)

    p = sub.add_parser("bound", help="evaluate a closed-form guarantee")
    p.add_argument("which", choices=["fc2fb", "fc2fb-threshold", "fc2at", "pekhn", "fcw2s-l",
                                     "fcw2s-stop", "fb-sample-complexity"])
    p.add_argument("--b", type=float, help="budget")
    p.add_argument("--t", type=float, help="time horizon")
    p.add_argument("--a", type=float, help="samples per nat")
    p.add_argument("--c", type=float, default=0.0, help="warm-up samples")
    p.add_argument("--q", type=float, default=1.0)
    _add_conf(p, "delta", "target failure rate")
    _add_conf(p, "delta0", "base failure rate")
    p.add_argument("--k", type=int)
    p.add_argument("--sigma2", type=_floats, help="per-arm variances, best arm first")
    p.add_argument("--gap", type=_floats, help="one gap for all suboptimal arms, or one per arm")
    p.add_argument("--l", type=int, help="number of weak-FC copies")
    p.add_argument("--f", type=int, help="weak-FC stopping time")
    p.add_argument("--F", type=float, help="error-bound prefactor")
    p.add_argument("--H", type=float, help="error-bound complexity")
    p.add_argument("--b0", type=int, default=0, help="warm-up budget")
    return parser


# -- commands ----------------------------------------------------------------

def cmd_instance(args) -> int:
    if args.gen == "explicit":
        if args.means is None or args.variances is None:
            raise UsageError("--gen explicit needs --means and --variances")
        inst = BanditInstance.from_arrays(args.means, args.variances)
    else:
        if args.k is None:
            raise UsageError(f"--gen {args.gen} needs --k")
        if args.gen == "figure":
            lo, hi = args.var
            inst = make_figure_instance(args.k, args.gap2, args.gap_rest, lo, hi, RandomStream(args.seed))
        else:
            if args.budget is None:
                raise UsageError("--gen adversarial needs --budget")
            inst = make_adversarial_shvar_instance(args.k, args.budget)
    text = inst.to_json(indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_run(args) -> int:
    inst = BanditInstance.from_json(args.instance.read_text(encoding="utf-8"))
    params = {}
    if args.algo == "fc2fb_pekhn":
        params = {"delta0_nats": _conf(args, "delta0", default_nats=1.0).nats, "q": args.q}
    elif args.algo == "shvar":
        params = {"cumulative": not args.per_round_means}
    est = make_estimator(args.algo, budget=args.budget, **params)
    reason = est.infeasibility(inst.K, inst.variances)
    if reason:
        raise UsageError(reason)
    est.fit(inst, args.seed)
    out = {
        "algorithm": args.algo,
        "chosen": est.best_arm_,
        "best_arm": inst.best_arm,
        "correct": est.best_arm_ == inst.best_arm,
        "pulls_used": est.outcome_.pulls_used,
        "per_arm_pulls": est.outcome_.per_arm_pulls.tolist(),
    }
    print(json.dumps(out))
    return EXIT_OK


def _sweep_config(args) -> ExperimentConfig:
    if args.config is not None:
        doc = json.loads(args.config.read_text(encoding="utf-8"))
        if args.seed is not None:
            doc["master_seed"] = args.seed
        if "master_seed" not in doc:
            raise UsageError("no master seed: pass --seed or set master_seed in the config")
        if args.trials is not None:
            doc["trials"] = args.trials
        config = ExperimentConfig.from_dict(doc)
        if config.axis != args.axis:
            raise UsageError(f"config sweeps over {config.axis!r} but this command sweeps {args.axis!r}")
        return config
    if args.seed is None:
        raise UsageError("missing --seed")
    if args.trials is None:
        raise UsageError("missing --trials")
    params: dict = {}
    if args.gen == "figure":
        lo, hi = args.var
        params = {"gap2": args.gap2, "gap_rest": args.gap_rest, "var_lo": lo, "var_hi": hi}
    elif args.gen == "explicit":
        raise UsageError("explicit instances are swept through --config")
    if args.axis == "budget":
        if args.k is None or not args.budgets:
            raise UsageError("sweep-budget needs --k and --budgets")
        params["K"] = args.k
        values, budget = args.budgets, None
    else:
        if not args.ks or args.budget is None:
            raise UsageError("sweep-arms needs --ks and --budget")
        values, budget = args.ks, args.budget
    algos = []
    for name in args.algos.split(","):
        name = name.strip()
        if name:
            algos.append(AlgorithmSpec(name))
    return ExperimentConfig(
        experiment_id=args.experiment_id or f"sweep-{args.axis}",
        instance=InstanceSpec(args.gen, params, args.instance_seed),
        algorithms=algos, axis=args.axis, values=values, budget=budget,
        trials=args.trials, master_seed=args.seed)


def cmd_sweep(args) -> int:
    config = _sweep_config(args)
    workers = args.threads if args.threads is not None else default_workers()
    if workers < 1:
        raise UsageError(f"--threads must be >= 1, got {workers}")
    table, wall = timed_run(config, workers)
    write_results(table, config, args.out, wall, workers)
    skipped = [c for c in table if c.skipped is not None]
    for c in skipped:
        logging.getLogger("bai").warning("skipped %s at %s=%s: %s", c.algorithm, c.axis_name,
                                         c.axis_value, c.skipped)
    return EXIT_PARTIAL if skipped else EXIT_OK


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.which} needs " + ", ".join(f"--{m}" for m in missing))


def _bound_instance(args) -> BanditInstance:
    _need(args, "k", "sigma2", "gap")
    if len(args.sigma2) != args.k:
        raise UsageError(f"--sigma2 needs {args.k} values")
    gaps = args.gap * (args.k - 1) if len(args.gap) == 1 else args.gap
    if len(gaps) != args.k - 1:
        raise UsageError(f"--gap needs 1 or {args.k - 1} values")
    if any(g <= 0 for g in gaps):
        raise UsageError("gaps must be positive")
    return BanditInstance.from_arrays([1.0] + [1.0 - g for g in gaps], args.sigma2)


def cmd_bound(args) -> int:
    w = args.which
    if w == "fc2fb":
        _need(args, "b", "a")
        value = theory.fc2fb_error_bound(args.b, args.a, _conf(args, "delta0"), args.q)
    elif w == "fc2fb-threshold":
        _need(args, "a")
        value = theory.fc2fb_budget_threshold(theory.StrongFCConstants(args.a, args.c),
                                              _conf(args, "delta0"), args.q)
    elif w == "fc2at":
        _need(args, "t", "a")
        value = theory.fc2at_error_bound(args.t, theory.StrongFCConstants(args.a, args.c),
                                         _conf(args, "delta0"), args.q)
    elif w == "pekhn":
        value = theory.pekhn_sample_bound(_bound_instance(args), _conf(args, "delta"))
    elif w == "fcw2s-l":
        value = fcw2s_required_trials(_conf(args, "delta"), _conf(args, "delta0"))
    elif w == "fcw2s-stop":
        _need(args, "l", "f")
        value = theory.fcw2s_stop_bound(args.l, args.f)
    else:
        _need(args, "F", "H")
        value = theory.fb_error_to_sample_complexity(args.F, args.H, _conf(args, "delta"), args.b0)
    print(format(value, ".12g") if isinstance(value, float) else value)
    return EXIT_OK


COMMANDS = {"instance": cmd_instance, "run": cmd_run, "sweep-budget": cmd_sweep,
            "sweep-arms": cmd_sweep, "bound": cmd_bound}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidInstanceError, InfeasibleInstanceError, json.JSONDecodeError) as exc:
        print(f"bai: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bai: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
