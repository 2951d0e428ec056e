"""Run statistics, cross-run averages and figure-ready CSV tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dynamics import Trajectory
from .game import StrategyProfile, VsgInstance
from .trust import evidence_prob, trust_hupe


@dataclass(frozen=True)
class RunSummary:
    validator_tokens: np.ndarray
    delegation_rate: float
    token_usage: np.ndarray  # t_i / b_i per user
    token_usage_mean: float  # among delegating users
    token_usage_mean_all: float
    hhi: float
    hhi_defined: bool
    top_shares: np.ndarray  # top_shares[k-1]: combined share of the k largest validators
    integrity: np.ndarray
    evidence_prob: np.ndarray
    commission: np.ndarray

    @property
    def m(self) -> int:
        return len(self.validator_tokens)

    def top_share(self, k: int) -> float:
        return float(self.top_shares[min(k, self.m) - 1])


def herfindahl(amounts: Sequence[float]) -> Optional[float]:
    """Sum of squared shares, or ``None`` when nothing is held."""
    a = np.asarray(amounts, dtype=float)
    total = a.sum()
    if total <= 0:
        return None
    return float(np.sum((a / total) ** 2))


def summarize(instance: VsgInstance, profile: StrategyProfile) -> RunSummary:
    tokens = np.array(profile.tokens, dtype=np.int64)
    per_validator = np.zeros(instance.m, dtype=np.int64)
    for s in profile:
        if not s.abstains:
            per_validator[s.validator] += s.tokens
    delegating = tokens > 0
    usage = tokens / instance.budget
    hhi = herfindahl(per_validator)
    total = per_validator.sum()
    if total > 0:
        top = np.cumsum(np.sort(per_validator)[::-1]) / total
    else:
        top = np.zeros(instance.m)
    return RunSummary(
        validator_tokens=per_validator,
        delegation_rate=float(delegating.mean()),
        token_usage=usage,
        token_usage_mean=float(usage[delegating].mean()) if delegating.any() else 0.0,
        token_usage_mean_all=float(usage.mean()),
        hhi=hhi if hhi is not None else 0.0,
        hhi_defined=hhi is not None,
        top_shares=top,
        integrity=instance.integrity.copy(),
        evidence_prob=np.array([evidence_prob(v.integrity, v.evidence_quality) for v in instance.validators]),
        commission=instance.commission.copy(),
    )


@dataclass(frozen=True)
class AggregateSummary:
    runs: int
    validator_tokens_mean: np.ndarray
    validator_tokens_std: np.ndarray
    delegation_rate_mean: float
    delegation_rate_std: float
    token_usage_mean: float
    token_usage_std: float
    token_usage_all_mean: float
    hhi_mean: float
    hhi_std: float
    top1_share_mean: float
    integrity: np.ndarray
    evidence_prob: np.ndarray
    commission: np.ndarray


def aggregate(summaries: Sequence[RunSummary]) -> AggregateSummary:
    """Arithmetic means and population standard deviations across runs."""
    if not summaries:
        raise ValueError("nothing to aggregate")
    m = summaries[0].m
    if any(s.m != m for s in summaries):
        raise ValueError("summaries disagree on the number of validators")
    tok = np.array([s.validator_tokens for s in summaries], dtype=float)

    def stat(values):
        v = np.asarray(values, dtype=float)
        return float(v.mean()), float(v.std())

    rate = stat([s.delegation_rate for s in summaries])
    usage = stat([s.token_usage_mean for s in summaries])
    hhi = stat([s.hhi for s in summaries])
    return AggregateSummary(
        runs=len(summaries),
        validator_tokens_mean=tok.mean(axis=0),
        validator_tokens_std=tok.std(axis=0),
        delegation_rate_mean=rate[0],
        delegation_rate_std=rate[1],
        token_usage_mean=usage[0],
        token_usage_std=usage[1],
        token_usage_all_mean=stat([s.token_usage_mean_all for s in summaries])[0],
        hhi_mean=hhi[0],
        hhi_std=hhi[1],
        top1_share_mean=stat([s.top_share(1) for s in summaries])[0],
        integrity=summaries[0].integrity,
        evidence_prob=summaries[0].evidence_prob,
        commission=summaries[0].commission,
    )


def trust_curve(p: float, q: float, qbar: float, k_max: int) -> list[tuple[int, float]]:
    """Trust against the number of identical delegators, ``k = 0 .. k_max``."""
    if int(k_max) != k_max or k_max < 0:
        raise ValueError(f"k_max must be a non-negative integer, got {k_max!r}")
    return [(k, trust_hupe(k, q, qbar, p)) for k in range(int(k_max) + 1)]


# ---------------------------------------------------------------------------
# CSV output

VALIDATOR_COLUMNS = ["validator", "integrity", "evidence_prob", "commission", "tokens", "share"]
USER_COLUMNS = ["user", "accuracy", "error", "budget", "validator", "tokens", "token_usage", "utility"]
TRAJECTORY_COLUMNS = [
    "round", "position", "user", "greedy",
    "validator_before", "tokens_before", "validator_after", "tokens_after",
    "utility_before", "utility_after",
]
AGGREGATE_COLUMNS = ["validator", "integrity", "evidence_prob", "commission", "tokens_mean", "tokens_std"]
SWEEP_COLUMNS = [
    "epsilon", "round_limit", "runs", "converged_runs",
    "delegation_rate_mean", "delegation_rate_std",
    "token_usage_mean", "token_usage_std", "token_usage_all_mean",
    "hhi_mean", "hhi_std", "top1_share_mean",
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write(path, columns: list[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_validators_csv(path, summary: RunSummary) -> None:
    total = summary.validator_tokens.sum()
    _write(
        path,
        VALIDATOR_COLUMNS,
        (
            (j, summary.integrity[j], summary.evidence_prob[j], summary.commission[j],
             summary.validator_tokens[j], summary.validator_tokens[j] / total if total else 0.0)
            for j in range(summary.m)
        ),
    )


def write_users_csv(path, instance: VsgInstance, profile: StrategyProfile, utilities: Sequence[float]) -> None:
    _write(
        path,
        USER_COLUMNS,
        (
            (i, u.accuracy, u.error, u.budget, s.validator, s.tokens, s.tokens / u.budget, float(utilities[i]))
            for i, (u, s) in enumerate(zip(instance.users, profile))
        ),
    )


def write_trajectory_csv(path, trajectory: Trajectory) -> None:
    rows = []
    for r, rec in enumerate(trajectory.rounds, start=1):
        for pos, mv in enumerate(rec.moves):
            rows.append((
                r, pos, mv.user, mv.greedy,
                mv.before.validator, mv.before.tokens, mv.after.validator, mv.after.tokens,
                mv.utility_before, mv.utility_after,
            ))
    _write(path, TRAJECTORY_COLUMNS, rows)


def write_aggregate_csv(path, agg: AggregateSummary) -> None:
    _write(
        path,
        AGGREGATE_COLUMNS,
        (
            (j, agg.integrity[j], agg.evidence_prob[j], agg.commission[j],
             agg.validator_tokens_mean[j], agg.validator_tokens_std[j])
            for j in range(len(agg.integrity))
        ),
    )


def sweep_row(epsilon: float, round_limit: int, agg: AggregateSummary, converged_runs: int) -> tuple:
    return (
        float(epsilon), int(round_limit), agg.runs, converged_runs,
        agg.delegation_rate_mean, agg.delegation_rate_std,
        agg.token_usage_mean, agg.token_usage_std, agg.token_usage_all_mean,
        agg.hhi_mean, agg.hhi_std, agg.top1_share_mean,
    )


def write_sweep_summary(path, rows: Iterable[tuple]) -> None:
    _write(path, SWEEP_COLUMNS, rows)


def write_trust_curve(path, series: Sequence[tuple[int, float]]) -> None:
    _write(path, ["k", "trust"], series)
