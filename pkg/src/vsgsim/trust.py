"""Bayesian trust of delegators in a validator's integrity.

A validator ``v`` stays in the market with prior probability ``p`` (its
integrity).  A public binary evidence signal reveals this truthfully with
probability ``z`` (evidence quality).  A user who sees positive evidence
delegates to ``v`` with probability ``q`` (accuracy) and with probability
``qbar`` (error) after negative evidence.  Observing which users delegate to
``v`` updates the prior into a posterior called *trust*.

Group products of accuracies are kept in log space: ``qbar ** 200`` is far
below the smallest double for small error values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

NEG_INF = float("-inf")


class DegenerateEvidenceError(ArithmeticError):
    """Raised when observations have zero probability under both hypotheses."""


def check_probability(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def safe_log(x: float) -> float:
    """``log(x)`` with ``log(0) = -inf``."""
    return math.log(x) if x > 0.0 else NEG_INF


@dataclass(frozen=True)
class ValidatorParams:
    """A delegatee: integrity ``p``, evidence quality ``z``, commission ``c``."""

    id: int
    integrity: float
    evidence_quality: float
    commission: float

    def __post_init__(self) -> None:
        check_probability("integrity", self.integrity)
        check_probability("evidence_quality", self.evidence_quality)
        if not (self.commission >= 0.0) or math.isinf(self.commission):
            raise ValueError(f"commission must be a finite non-negative rate, got {self.commission!r}")


@dataclass(frozen=True)
class UserParams:
    """A delegator: accuracy ``q``, error ``qbar`` and token budget ``b``."""

    id: int
    accuracy: float
    error: float
    budget: float

    def __post_init__(self) -> None:
        check_probability("accuracy", self.accuracy)
        check_probability("error", self.error)
        if not (self.budget > 0.0) or math.isinf(self.budget):
            raise ValueError(f"budget must be a finite positive amount, got {self.budget!r}")


def prior_choice_prob(q: float, qbar: float, p: float) -> float:
    """Unconditional probability that a user delegates to the validator.

    Marginalizes the user's choice over perfect evidence: ``q*p + qbar*(1-p)``.
    """
    q = check_probability("q", q)
    qbar = check_probability("qbar", qbar)
    p = check_probability("p", p)
    return qbar + p * (q - qbar)


def evidence_prob(p: float, z: float) -> float:
    """Marginal probability that the evidence signal is positive."""
    p = check_probability("p", p)
    z = check_probability("z", z)
    return z * p + (1.0 - z) * (1.0 - p)


def trust_single(q: float, qbar: float, z: float, p: float) -> float:
    """Trust after observing one user's own delegation choice.

    Evaluated directly (no log space), it doubles as an independent check on
    :func:`trust_group` for single-member groups.
    """
    q = check_probability("q", q)
    qbar = check_probability("qbar", qbar)
    z = check_probability("z", z)
    p = check_probability("p", p)
    stay = q * z * p + qbar * (1.0 - z) * p
    leave = q * (1.0 - z) * (1.0 - p) + qbar * z * (1.0 - p)
    if stay + leave <= 0.0:
        raise DegenerateEvidenceError(f"choice has zero probability (q={q}, qbar={qbar}, z={z}, p={p})")
    return stay / (stay + leave)


def _logistic(d: float) -> float:
    """``1 / (1 + exp(d))``, evaluated so that results near 0 or 1 keep full precision."""
    x = math.exp(-abs(d))
    return 1.0 - x / (1.0 + x) if d < 0.0 else x / (1.0 + x)


def _posterior(stay: float, leave: float, p: float) -> float:
    """Posterior from unnormalized masses ``stay * p`` and ``leave * (1 - p)``.

    The prior enters through logs so a tiny ``p`` cannot underflow the masses.
    """
    log_stay = safe_log(stay) + safe_log(p)
    log_leave = safe_log(leave) + (math.log1p(-p) if p < 1.0 else NEG_INF)
    if log_stay == NEG_INF and log_leave == NEG_INF:
        raise DegenerateEvidenceError("group choices have zero probability under both hypotheses")
    if log_stay == NEG_INF:
        return 0.0
    if log_leave == NEG_INF:
        return 1.0
    return _logistic(log_leave - log_stay)


def posterior_from_logs(log_q: float, log_qbar: float, z: float, p: float) -> float:
    """Trust from group log-products ``sum(log q_l)`` and ``sum(log qbar_l)``.

    Both products are rescaled by the larger one before leaving log space, so
    only their ratio is ever exponentiated.  ``-inf`` stands for a zero
    product and yields exact 0/1 posteriors.
    """
    top = max(log_q, log_qbar)
    if top == NEG_INF:
        raise DegenerateEvidenceError("both accuracy and error products are zero")
    a = math.exp(log_q - top)
    b = math.exp(log_qbar - top)
    return _posterior(a * z + b * (1.0 - z), a * (1.0 - z) + b * z, p)


def posterior_from_logs_array(log_q, log_qbar, z, p) -> np.ndarray:
    """Vectorized :func:`posterior_from_logs`; degenerate entries come back as NaN."""
    log_q = np.asarray(log_q, dtype=float)
    log_qbar = np.asarray(log_qbar, dtype=float)
    z = np.asarray(z, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        top = np.maximum(log_q, log_qbar)
        a = np.exp(log_q - top)
        b = np.exp(log_qbar - top)
        log_stay = np.log(a * z + b * (1.0 - z)) + np.log(p)
        log_leave = np.log(a * (1.0 - z) + b * z) + np.log1p(-p)
        d = log_leave - log_stay
        x = np.exp(-np.abs(d))
        out = np.where(d < 0.0, 1.0 - x / (1.0 + x), x / (1.0 + x))
    out = np.where(log_stay == -np.inf, 0.0, out)
    out = np.where(log_leave == -np.inf, 1.0, out)
    degenerate = (log_stay == -np.inf) & (log_leave == -np.inf) | np.isnan(top) | (top == -np.inf)
    return np.where(degenerate, np.nan, out)


def trust_group(members: Iterable[tuple[float, float]], z: float, p: float) -> float:
    """Trust in a validator given every member of its delegator group.

    ``members`` holds one ``(q, qbar)`` pair per delegator.  An empty group
    returns the prior ``p``.
    """
    z = check_probability("z", z)
    p = check_probability("p", p)
    log_q = 0.0
    log_qbar = 0.0
    for k, (q, qbar) in enumerate(members):
        log_q += safe_log(check_probability(f"members[{k}].q", q))
        log_qbar += safe_log(check_probability(f"members[{k}].qbar", qbar))
    return posterior_from_logs(log_q, log_qbar, z, p)


def trust_hupe(k: int, q: float, qbar: float, p: float) -> float:
    """Closed-form trust for ``k`` identical delegators under perfect evidence."""
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a non-negative integer, got {k!r}")
    q = check_probability("q", q)
    qbar = check_probability("qbar", qbar)
    p = check_probability("p", p)
    log_q = k * safe_log(q) if k else 0.0
    log_qbar = k * safe_log(qbar) if k else 0.0
    return posterior_from_logs(log_q, log_qbar, 1.0, p)


def group_log_sums(members: Sequence[UserParams]) -> tuple[float, float]:
    return (
        sum(safe_log(u.accuracy) for u in members),
        sum(safe_log(u.error) for u in members),
    )
