"""Command-line interface: ``vsgsim <command> ...``.

Exit codes: 0 success, 2 usage, 3 file I/O or file format, 4 domain or
precondition failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis, game, scenario
from .dynamics import GbrdConfig, Termination, run_gbrd
from .game import ConditionError, VsgInstance
from .trust import DegenerateEvidenceError, UserParams, ValidatorParams

log = logging.getLogger("vsgsim")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _setup_logging() -> None:
    level = os.environ.get("VSG_SIM_LOG", "off").lower()
    levels = {"info": logging.INFO, "debug": logging.DEBUG}
    if level in levels:
        logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_spec(ref: str) -> scenario.ScenarioSpec:
    if ref == "default-paper":
        return scenario.DEFAULT_PAPER
    try:
        data = json.loads(Path(ref).read_text())
    except OSError as exc:
        raise CliError(f"cannot read spec {ref}: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{ref}: not valid JSON ({exc})", EXIT_IO) from exc
    try:
        return scenario.ScenarioSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise CliError(f"{ref}: {exc}", EXIT_IO) from exc


def _load_instance(path: str) -> VsgInstance:
    try:
        return scenario.load_instance(path)
    except OSError as exc:
        raise CliError(f"cannot read instance {path}: {exc}", EXIT_IO) from exc
    except scenario.InstanceFileError as exc:
        raise CliError(str(exc), EXIT_IO) from exc


# ---------------------------------------------------------------------------
# gen-scenario


def cmd_gen_scenario(args: argparse.Namespace) -> int:
    spec = _read_spec(args.spec)
    inst = scenario.sample_instance(spec, np.random.default_rng(args.seed))
    try:
        scenario.save_instance(inst, args.out, seed=args.seed, spec=spec)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    print(f"wrote {args.out}: {inst.n} users, {inst.m} validators, profit {inst.profit:g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _run_one(task):
    instance, cfg = task
    final, traj = run_gbrd(instance, cfg)
    return final, traj


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.instance:
        instance = _load_instance(args.instance)
    else:
        spec = _read_spec(args.spec)
        instance = scenario.sample_instance(spec, np.random.default_rng(args.scenario_seed))
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not args.instance:
            scenario.save_instance(instance, out / "instance.json", seed=args.scenario_seed, spec=spec)
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}", EXIT_IO) from exc

    seeds = [args.seed + k for k in range(args.instances)]
    cells = [(e, rl) for rl in args.rounds for e in args.epsilon]
    tasks, keys = [], []
    for e, rl in cells:
        for s in seeds:
            cfg = GbrdConfig(
                epsilon=e, round_limit=rl, convergence_ratio=args.convergence, seed=s,
                mode=args.mode, abstain=not args.no_abstain,
            )
            tasks.append((instance, cfg))
            keys.append((e, rl, s))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = []
        for (e, rl, s), task in zip(keys, tasks):
            try:
                results.append(_run_one(task))
            except (ValueError, ArithmeticError) as exc:
                raise CliError(f"run epsilon={e:g} rounds={rl} seed={s} failed: {exc}", EXIT_DOMAIN) from exc

    rows = []
    by_cell: dict = {}
    try:
        for (e, rl, s), (final, traj) in zip(keys, results):
            run_id = f"eps{e:g}_rl{rl}_seed{s}"
            summary = analysis.summarize(instance, final)
            utilities = traj.rounds[-1].utilities
            analysis.write_validators_csv(out / f"{run_id}_validators.csv", summary)
            analysis.write_users_csv(out / f"{run_id}_users.csv", instance, final, utilities)
            analysis.write_trajectory_csv(out / f"{run_id}_trajectory.csv", traj)
            by_cell.setdefault((e, rl), []).append((summary, traj.terminated_by))
        for e, rl in cells:
            entries = by_cell[(e, rl)]
            agg = analysis.aggregate([s for s, _ in entries])
            converged = sum(t is Termination.CONVERGED for _, t in entries)
            analysis.write_aggregate_csv(out / f"eps{e:g}_rl{rl}_aggregate.csv", agg)
            rows.append(analysis.sweep_row(e, rl, agg, converged))
            print(
                f"epsilon={e:g} rounds={rl} runs={agg.runs}: delegation rate {agg.delegation_rate_mean:.4f}, "
                f"token usage {agg.token_usage_mean:.4f}, HHI {agg.hhi_mean:.4f}"
            )
        analysis.write_sweep_summary(out / "sweep_summary.csv", rows)
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc}", EXIT_IO) from exc
    return EXIT_OK


# ---------------------------------------------------------------------------
# check-ne


def _parse_params(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise CliError(f"--params entries must look like key=value, got {item!r}", EXIT_USAGE)
        out[key.strip()] = value.strip()
    return out


def _constructed_instance(kind: str, params: dict[str, str]) -> tuple[VsgInstance, game.ContinuousProfile]:
    def num(key, default=None):
        if key not in params:
            if default is None:
                raise CliError(f"--construct {kind} needs {key}=...", EXIT_USAGE)
            return default
        try:
            return float(params[key])
        except ValueError:
            raise CliError(f"{key} must be a number, got {params[key]!r}", EXIT_USAGE) from None

    allowed = {
        "single": {"n", "r", "c", "p", "q", "qbar", "budget"},
        "homogeneous": {"n", "m", "r", "c", "p", "q", "qbar", "budget"},
        "commission-free": {"n", "r", "p", "q", "qbar", "budget"},
    }[kind]
    unknown = set(params) - allowed
    if unknown:
        raise CliError(f"unknown parameters for {kind}: {sorted(unknown)}", EXIT_USAGE)

    n = int(num("n"))
    r, q, qbar = num("r"), num("q"), num("qbar")
    if kind == "commission-free":
        try:
            ps = [float(x) for x in params.get("p", "").split(",") if x]
        except ValueError:
            raise CliError("p must be a comma-separated list of numbers", EXIT_USAGE) from None
        if not ps:
            raise CliError("--construct commission-free needs p=...", EXIT_USAGE)
        c = 0.0
    else:
        c = num("c")
        ps = [num("p")] * (int(num("m", 1)) if kind == "homogeneous" else 1)
    if n < 2:
        raise ConditionError("at least two users", f"n={n}")
    ne = game.single_validator_ne(n, r, c, max(ps), q, qbar)
    budget = num("budget", max(2.0 * ne.budget_floor, 1.0 + c))
    validators = [ValidatorParams(j, p, 1.0, c) for j, p in enumerate(ps)]
    users = [UserParams(i, q, qbar, budget) for i in range(n)]
    instance = VsgInstance(users, validators, r)
    builder = game.commission_free_ne if kind == "commission-free" else game.homogeneous_ne
    return instance, builder(instance)


def cmd_check_ne(args: argparse.Namespace) -> int:
    if args.construct:
        instance, profile = _constructed_instance(args.construct, _parse_params(args.params or []))
        ne = profile.closed_form
        r = instance.profit
        residual = abs(game.token_derivative(instance, profile, 0))
        gains = game.deviation_gains(instance, profile, 0, np.random.default_rng(args.seed), args.samples)
        j, t, u_switch = game.best_continuous_deviation(instance, profile, 0)
        u0 = profile.utility(instance, 0)
        print(f"construction: {args.construct} (n={instance.n}, m={instance.m}, r={r:g})")
        print(f"validator: {profile.delegations[0]}  tokens per user: {ne.t_star!r}")
        print(f"trust: {ne.trust!r}  per-user utility: {u0!r} (r/n^2 = {ne.utility!r})")
        print(f"stationarity residual |du/dt|: {residual:.3e}")
        print(f"max gain over {args.samples} sampled deviations: {max(gains.max(), 0.0):.3e}")
        print(f"best continuous reply: validator {j}, tokens {t:.6g}, utility {u_switch!r}")
        ok = residual <= 1e-6 * r and gains.max() <= 1e-9
        if ok:
            print("equilibrium (residual <= 1e-6*r)")
        else:
            print("NOT an equilibrium within tolerance")
        return EXIT_OK

    if not (args.instance and args.profile):
        raise CliError("check-ne needs --instance and --profile, or --construct", EXIT_USAGE)
    instance = _load_instance(args.instance)
    try:
        profile = scenario.load_profile(args.profile)
    except OSError as exc:
        raise CliError(f"cannot read profile {args.profile}: {exc}", EXIT_IO) from exc
    except scenario.InstanceFileError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    profile.validate(instance)
    verdict = game.is_nash(instance, profile, tolerance=args.tolerance)
    print(verdict)
    return EXIT_OK


# ---------------------------------------------------------------------------
# trust-curve


def cmd_trust_curve(args: argparse.Namespace) -> int:
    series = analysis.trust_curve(args.p, args.q, args.qbar, args.kmax)
    try:
        analysis.write_trust_curve(args.out, series)
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    print(f"wrote {args.out}: {len(series)} points, trust {series[0][1]:.4f} -> {series[-1][1]:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _probability(text: str) -> float:
    x = float(text)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return x


def _positive_int(text: str) -> int:
    x = int(text)
    if x < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsgsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenario", help="sample a game instance and write it as JSON")
    g.add_argument("--spec", default="default-paper", help="scenario spec JSON file or 'default-paper'")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_scenario)

    s = sub.add_parser(
        "simulate",
        help="run epsilon-greedy best response dynamics",
        description=(
            "Runs N seeds (S..S+N-1) for every (epsilon, rounds) cell. Writes, per run, "
            "<run-id>_validators.csv (validator, integrity, evidence_prob, commission, tokens, share), "
            "<run-id>_users.csv (user, accuracy, error, budget, validator, tokens, token_usage, utility) and "
            "<run-id>_trajectory.csv (one row per move); per cell <cell>_aggregate.csv "
            "(validator, integrity, evidence_prob, commission, tokens_mean, tokens_std); "
            "and sweep_summary.csv with one row per cell. run-id is eps<E>_rl<RL>_seed<S>."
        ),
    )
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--spec", help="sample a fresh instance from a spec file or 'default-paper'")
    s.add_argument("--scenario-seed", type=int, default=0, help="seed for --spec sampling")
    s.add_argument("--epsilon", type=_probability, nargs="+", required=True)
    s.add_argument("--rounds", type=_positive_int, nargs="+", required=True)
    s.add_argument("--instances", type=_positive_int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--convergence", type=float, default=0.01)
    s.add_argument("--mode", choices=["relative", "absolute"], default="relative")
    s.add_argument("--no-abstain", action="store_true", help="drop abstention from users' choices")
    s.add_argument("--jobs", type=_positive_int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check-ne", help="check or construct a Nash equilibrium")
    c.add_argument("--instance")
    c.add_argument("--profile")
    c.add_argument("--tolerance", type=float, default=0.0)
    c.add_argument("--construct", choices=["single", "homogeneous", "commission-free"])
    c.add_argument("--params", nargs="*", metavar="KEY=VALUE")
    c.add_argument("--samples", type=_positive_int, default=200)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check_ne)

    t = sub.add_parser("trust-curve", help="trust against the number of delegators (CSV: k, trust)")
    t.add_argument("--p", type=_probability, required=True)
    t.add_argument("--q", type=_probability, required=True)
    t.add_argument("--qbar", type=_probability, required=True)
    t.add_argument("--kmax", type=int, required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trust_curve)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"vsgsim: error: {exc}", file=sys.stderr)
        return exc.code
    except ConditionError as exc:
        print(f"vsgsim: condition violated: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ValueError, DegenerateEvidenceError, ArithmeticError) as exc:
        print(f"vsgsim: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
