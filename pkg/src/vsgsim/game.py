"""Validator selection games: strategies, utilities, best responses, equilibria.

Users pick a validator and an integer token count, or abstain.  A user ``i``
delegating ``t_i`` tokens to validator ``j`` earns

    u_i = r * T_j * t_i / D  -  c_j * t_i  -  (1 - T_j) * t_i

where ``T_j`` is the group trust in ``j`` and ``D`` is the trust-weighted token
mass of every delegating user.  Abstaining users earn 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .trust import (
    NEG_INF,
    DegenerateEvidenceError,
    UserParams,
    ValidatorParams,
    posterior_from_logs,
    posterior_from_logs_array,
    safe_log,
    trust_group,
    trust_hupe,
)

# Relative slack when comparing utilities that should tie exactly.
TIE_RTOL = 1e-12


class ConditionError(ValueError):
    """A theorem's precondition does not hold for the given game."""

    def __init__(self, condition: str, detail: str = "") -> None:
        self.condition = condition
        super().__init__(f"{condition}: {detail}" if detail else condition)


class DegenerateDenominatorError(ArithmeticError):
    """The trust-weighted token mass is zero while the user holds tokens."""


def affordable_tokens(budget: float, commission: float) -> int:
    """Largest integer ``t`` with ``t * (1 + commission) <= budget``."""
    rate = 1.0 + commission
    t = int(math.floor(budget / rate))
    while t > 0 and t * rate > budget:
        t -= 1
    while (t + 1) * rate <= budget:
        t += 1
    return t


@dataclass(frozen=True)
class Strategy:
    """A user's choice: ``validator`` index (``None`` to abstain) and tokens."""

    validator: Optional[int]
    tokens: int

    def __post_init__(self) -> None:
        if isinstance(self.tokens, bool) or int(self.tokens) != self.tokens:
            raise ValueError(f"tokens must be an integer, got {self.tokens!r}")
        object.__setattr__(self, "tokens", int(self.tokens))
        if self.tokens < 0:
            raise ValueError("tokens must be non-negative")
        if (self.validator is None) != (self.tokens == 0):
            raise ValueError("tokens must be 0 exactly when the user abstains")

    @classmethod
    def abstain(cls) -> "Strategy":
        return cls(None, 0)

    @property
    def abstains(self) -> bool:
        return self.validator is None

    def __str__(self) -> str:
        return "abstain" if self.abstains else f"v{self.validator}:{self.tokens}"


ABSTAIN = Strategy.abstain()


@dataclass(frozen=True)
class VsgInstance:
    users: tuple[UserParams, ...]
    validators: tuple[ValidatorParams, ...]
    profit: float
    meta: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "validators", tuple(self.validators))
        if not self.users:
            raise ValueError("a game needs at least one user")
        if not self.validators:
            raise ValueError("a game needs at least one validator")
        if not (self.profit > 0.0) or math.isinf(self.profit):
            raise ValueError(f"profit must be finite and positive, got {self.profit!r}")

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def m(self) -> int:
        return len(self.validators)

    @cached_property
    def integrity(self) -> np.ndarray:
        return np.array([v.integrity for v in self.validators])

    @cached_property
    def evidence_quality(self) -> np.ndarray:
        return np.array([v.evidence_quality for v in self.validators])

    @cached_property
    def commission(self) -> np.ndarray:
        return np.array([v.commission for v in self.validators])

    @cached_property
    def budget(self) -> np.ndarray:
        return np.array([u.budget for u in self.users])

    @cached_property
    def max_tokens(self) -> np.ndarray:
        """``max_tokens[i, j]``: most tokens user ``i`` can place with validator ``j``."""
        return np.array(
            [[affordable_tokens(u.budget, v.commission) for v in self.validators] for u in self.users],
            dtype=np.int64,
        )


@dataclass(frozen=True)
class StrategyProfile:
    strategies: tuple[Strategy, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategies", tuple(self.strategies))

    @classmethod
    def all_abstain(cls, n: int) -> "StrategyProfile":
        return cls((ABSTAIN,) * n)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Optional[int], int]]) -> "StrategyProfile":
        return cls(tuple(Strategy(d, t) for d, t in pairs))

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, i: int) -> Strategy:
        return self.strategies[i]

    def __iter__(self):
        return iter(self.strategies)

    def replace(self, i: int, strategy: Strategy) -> "StrategyProfile":
        s = list(self.strategies)
        s[i] = strategy
        return StrategyProfile(tuple(s))

    @property
    def delegations(self) -> tuple[Optional[int], ...]:
        return tuple(s.validator for s in self.strategies)

    @property
    def tokens(self) -> tuple[int, ...]:
        return tuple(s.tokens for s in self.strategies)

    def validate(self, instance: VsgInstance) -> None:
        if len(self) != instance.n:
            raise ValueError(f"profile has {len(self)} strategies for {instance.n} users")
        for i, s in enumerate(self.strategies):
            if s.abstains:
                continue
            if not (0 <= s.validator < instance.m):
                raise ValueError(f"user {i} delegates to unknown validator {s.validator}")
            if s.tokens > instance.max_tokens[i, s.validator]:
                raise ValueError(
                    f"user {i} exceeds budget: {s.tokens} tokens at commission "
                    f"{instance.validators[s.validator].commission} with budget {instance.users[i].budget}"
                )


# ---------------------------------------------------------------------------
# From-scratch evaluation


def _members(instance: VsgInstance, delegations: Sequence[Optional[int]], j: int) -> list[tuple[float, float]]:
    return [(instance.users[i].accuracy, instance.users[i].error) for i, d in enumerate(delegations) if d == j]


def _group_trusts(instance: VsgInstance, delegations: Sequence[Optional[int]]) -> list[float]:
    out = []
    for j, v in enumerate(instance.validators):
        members = _members(instance, delegations, j)
        out.append(trust_group(members, v.evidence_quality, v.integrity) if members else v.integrity)
    return out


def group_trusts(instance: VsgInstance, profile: StrategyProfile) -> list[float]:
    """Trust in every validator given who delegates to it (prior if nobody)."""
    return _group_trusts(instance, profile.delegations)


def continuous_utility(
    instance: VsgInstance,
    delegations: Sequence[Optional[int]],
    tokens: Sequence[float],
    i: int,
) -> float:
    """Utility of user ``i`` for real-valued token amounts.

    A user with ``delegations[i] is None`` or zero tokens earns 0.  Users with
    zero tokens do not join their validator's group.
    """
    delegations = [d if t > 0 else None for d, t in zip(delegations, tokens)]
    d_i = delegations[i]
    if d_i is None:
        return 0.0
    trusts = _group_trusts(instance, delegations)
    denom = sum(trusts[d] * t for d, t in zip(delegations, tokens) if d is not None)
    t_i = tokens[i]
    trust_i = trusts[d_i]
    if denom <= 0.0:
        raise DegenerateDenominatorError(f"user {i} holds {t_i} tokens but the weighted token mass is 0")
    c = instance.validators[d_i].commission
    return instance.profit * trust_i * t_i / denom - c * t_i - (1.0 - trust_i) * t_i


def utility(instance: VsgInstance, profile: StrategyProfile, i: int) -> float:
    """Utility of user ``i`` under ``profile``, recomputed from scratch."""
    return continuous_utility(instance, profile.delegations, profile.tokens, i)


# ---------------------------------------------------------------------------
# Incremental evaluation


class GroupTrustCache:
    """Per-validator group statistics kept in sync with a mutable profile.

    Holds the log-product accumulators, group trust and token sum of every
    validator.  Zero accuracies/errors are counted separately so that the
    log sums stay finite and removals never compute ``-inf - -inf``.

    Single-owner and mutable; not safe to share across threads.
    """

    def __init__(self, instance: VsgInstance, profile: StrategyProfile) -> None:
        profile.validate(instance)
        self.instance = instance
        users = instance.users
        self._lq = np.array([safe_log(u.accuracy) for u in users])
        self._lqb = np.array([safe_log(u.error) for u in users])
        self._q_zero = np.isinf(self._lq)
        self._qb_zero = np.isinf(self._lqb)
        self._lq_f = np.where(self._q_zero, 0.0, self._lq)
        self._lqb_f = np.where(self._qb_zero, 0.0, self._lqb)
        self._p = instance.integrity
        self._z = instance.evidence_quality
        self._c = instance.commission
        self._history: list[tuple[int, Strategy]] = []
        self.recompute(profile)

    # -- state ----------------------------------------------------------------

    def recompute(self, profile: Optional[StrategyProfile] = None) -> None:
        """Rebuild every accumulator from scratch."""
        if profile is not None:
            self.strategies = list(profile.strategies)
        m = self.instance.m
        self.members = np.zeros(m, dtype=np.int64)
        self.q_zeros = np.zeros(m, dtype=np.int64)
        self.qbar_zeros = np.zeros(m, dtype=np.int64)
        self.log_q = np.zeros(m)
        self.log_qbar = np.zeros(m)
        self.token_sum = np.zeros(m, dtype=np.int64)
        for i, s in enumerate(self.strategies):
            if not s.abstains:
                self._add(i, s)
        self.trust = np.array(self._p, dtype=float)
        for j in range(m):
            self._refresh(j)

    @property
    def profile(self) -> StrategyProfile:
        return StrategyProfile(tuple(self.strategies))

    @property
    def denominator(self) -> float:
        return float(np.dot(self.trust, self.token_sum))

    def _effective_logs(self, j: int) -> tuple[float, float]:
        lq = NEG_INF if self.q_zeros[j] else float(self.log_q[j])
        lqb = NEG_INF if self.qbar_zeros[j] else float(self.log_qbar[j])
        return lq, lqb

    def _refresh(self, j: int) -> None:
        if self.members[j] == 0:
            self.trust[j] = self._p[j]
            self.log_q[j] = 0.0
            self.log_qbar[j] = 0.0
        else:
            lq, lqb = self._effective_logs(j)
            self.trust[j] = posterior_from_logs(lq, lqb, self._z[j], self._p[j])

    def _add(self, i: int, s: Strategy, sign: int = 1) -> None:
        j = s.validator
        self.members[j] += sign
        self.q_zeros[j] += sign * int(self._q_zero[i])
        self.qbar_zeros[j] += sign * int(self._qb_zero[i])
        self.log_q[j] += sign * self._lq_f[i]
        self.log_qbar[j] += sign * self._lqb_f[i]
        self.token_sum[j] += sign * s.tokens

    def _move(self, i: int, new: Strategy) -> None:
        old = self.strategies[i]
        if not old.abstains:
            self._add(i, old, -1)
        if not new.abstains:
            self._add(i, new, 1)
        self.strategies[i] = new
        for j in {old.validator, new.validator} - {None}:
            self._refresh(j)

    def apply(self, i: int, strategy: Strategy) -> None:
        """Switch user ``i`` to ``strategy``; reversible with :meth:`undo`."""
        if not strategy.abstains and strategy.tokens > self.instance.max_tokens[i, strategy.validator]:
            raise ValueError(f"strategy {strategy} exceeds user {i}'s budget")
        self._history.append((i, self.strategies[i]))
        self._move(i, strategy)

    def undo(self) -> None:
        i, previous = self._history.pop()
        self._move(i, previous)

    def commit(self) -> None:
        """Forget the undo history."""
        self._history.clear()

    # -- evaluation -----------------------------------------------------------

    def utility(self, i: int) -> float:
        s = self.strategies[i]
        if s.abstains:
            return 0.0
        j = s.validator
        trust = float(self.trust[j])
        denom = self.denominator
        if denom <= 0.0:
            raise DegenerateDenominatorError(f"user {i} holds tokens but the weighted token mass is 0")
        return self.instance.profit * trust * s.tokens / denom - (self._c[j] + (1.0 - trust)) * s.tokens

    def utilities(self) -> np.ndarray:
        return np.array([self.utility(i) for i in range(self.instance.n)])

    def candidate_utilities(self, i: int) -> np.ndarray:
        """Utility of user ``i`` for every (validator, tokens) pair.

        Returns an ``(m, K)`` array whose entry ``[j, t - 1]`` is the utility of
        delegating ``t`` tokens to ``j`` with everyone else fixed; infeasible
        or degenerate entries are ``-inf``.  Abstaining is worth 0 and is not
        part of the grid.
        """
        self.apply(i, ABSTAIN)
        try:
            lq_self, lqb_self = self._lq[i], self._lqb[i]
            lq = np.where(self.q_zeros > 0, -np.inf, self.log_q) + lq_self
            lqb = np.where(self.qbar_zeros > 0, -np.inf, self.log_qbar) + lqb_self
            joined = posterior_from_logs_array(lq, lqb, self._z, self._p)
            rest = self.denominator - self.trust * self.token_sum
            token_sum = self.token_sum.astype(float)
        finally:
            self.undo()
        limits = self.instance.max_tokens[i]
        k = int(limits.max())
        t = np.arange(1, k + 1, dtype=float)[None, :]
        tj = joined[:, None]
        denom = rest[:, None] + tj * (token_sum[:, None] + t)
        gain = self.instance.profit * tj * t
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(gain > 0.0, gain / denom, 0.0)
        u = share - (self._c[:, None] + (1.0 - tj)) * t
        feasible = (t <= limits[:, None]) & ~np.isnan(tj)
        return np.where(feasible, u, -np.inf)


# ---------------------------------------------------------------------------
# Best responses and equilibria


@dataclass(frozen=True)
class BestResponse:
    """Best and strictly-better replies of one user against a fixed profile.

    Candidates are encoded as parallel arrays (validator ``-1`` means abstain)
    in canonical order: abstain first, then by validator, then by tokens.
    """

    user: int
    current: Strategy
    current_utility: float
    best_utility: float
    best_validators: np.ndarray
    best_tokens: np.ndarray
    better_validators: np.ndarray
    better_tokens: np.ndarray

    @staticmethod
    def _decode(validators: np.ndarray, tokens: np.ndarray) -> tuple[Strategy, ...]:
        return tuple(ABSTAIN if v < 0 else Strategy(int(v), int(t)) for v, t in zip(validators, tokens))

    @property
    def best(self) -> tuple[Strategy, ...]:
        return self._decode(self.best_validators, self.best_tokens)

    @property
    def better(self) -> tuple[Strategy, ...]:
        return self._decode(self.better_validators, self.better_tokens)

    def best_at(self, k: int) -> Strategy:
        v = int(self.best_validators[k])
        return ABSTAIN if v < 0 else Strategy(v, int(self.best_tokens[k]))

    def better_at(self, k: int) -> Strategy:
        v = int(self.better_validators[k])
        return ABSTAIN if v < 0 else Strategy(v, int(self.better_tokens[k]))

    @property
    def gain(self) -> float:
        return self.best_utility - self.current_utility


def best_response_sets(
    instance: VsgInstance,
    profile: Optional[StrategyProfile],
    i: int,
    cache: Optional[GroupTrustCache] = None,
    allow_abstain: bool = True,
) -> BestResponse:
    """Enumerate user ``i``'s whole discrete strategy space.

    Pass a live ``cache`` to skip rebuilding group statistics; its current
    strategies then take the place of ``profile``.  With ``allow_abstain``
    false, abstaining is dropped from the candidates (unless nothing else is
    affordable) and every delegation beats a current abstention.
    """
    if cache is None:
        cache = GroupTrustCache(instance, profile)
    grid = cache.candidate_utilities(i)
    current = cache.strategies[i]
    if current.abstains:
        u_cur = 0.0
    else:
        u_cur = float(grid[current.validator, current.tokens - 1])
    grid_max = float(grid.max()) if grid.size else NEG_INF
    if not allow_abstain and grid_max > NEG_INF:
        u_max = grid_max
        tol = TIE_RTOL * max(1.0, abs(u_max))
        abstain_best = abstain_better = False
        u_floor = NEG_INF if current.abstains else u_cur
    else:
        u_max = max(0.0, grid_max)
        tol = TIE_RTOL * max(1.0, abs(u_max))
        abstain_best = 0.0 >= u_max - tol
        abstain_better = (not abstain_best) and 0.0 > u_cur + tol
        u_floor = u_cur

    is_best = grid >= u_max - tol
    is_better = (grid > u_floor + tol) & ~is_best
    bj, bt = np.nonzero(is_best)
    rj, rt = np.nonzero(is_better)
    if abstain_best:
        bj, bt = np.concatenate(([-1], bj)), np.concatenate(([0], bt + 1))
    else:
        bt = bt + 1
    if abstain_better:
        rj, rt = np.concatenate(([-1], rj)), np.concatenate(([0], rt + 1))
    else:
        rt = rt + 1
    return BestResponse(
        user=i,
        current=current,
        current_utility=u_cur,
        best_utility=u_max,
        best_validators=bj,
        best_tokens=bt,
        better_validators=rj,
        better_tokens=rt,
    )


@dataclass(frozen=True)
class NashVerdict:
    equilibrium: bool
    user: Optional[int] = None
    deviation: Optional[Strategy] = None
    gain: float = 0.0

    def __str__(self) -> str:
        if self.equilibrium:
            return "equilibrium"
        return f"not an equilibrium: user {self.user} gains {self.gain:.6g} by switching to {self.deviation}"


def is_nash(instance: VsgInstance, profile: StrategyProfile, tolerance: float = 0.0) -> NashVerdict:
    """Check that no user can improve by more than ``tolerance`` on the token grid.

    Returns the first profitable deviation found, using that user's best reply.
    """
    cache = GroupTrustCache(instance, profile)
    for i in range(instance.n):
        br = best_response_sets(instance, None, i, cache)
        if br.gain > tolerance and br.current not in br.best:
            return NashVerdict(False, i, br.best_at(0), br.gain)
    return NashVerdict(True)


def max_deviation_gain(instance: VsgInstance, profile: StrategyProfile) -> float:
    cache = GroupTrustCache(instance, profile)
    return max(best_response_sets(instance, None, i, cache).gain for i in range(instance.n))


# ---------------------------------------------------------------------------
# Continuous-token equilibria


def continuous_optimal_tokens(r: float, others_weight: float, w: float, trust_self: float) -> float:
    """Utility-maximizing real token count against a fixed weighted token mass.

    ``others_weight`` is the trust-weighted tokens of everyone else, ``w`` the
    per-token cost ``1 + c - T`` and ``trust_self`` the user's own trust.
    """
    if w <= 0.0:
        raise ValueError(f"per-token cost w must be positive (utility unbounded otherwise), got {w}")
    if trust_self <= 0.0:
        raise ValueError(f"trust must be positive, got {trust_self}")
    if others_weight < 0.0:
        raise ValueError(f"others_weight must be non-negative, got {others_weight}")
    if others_weight == 0.0:
        return 0.0
    return max(0.0, math.sqrt(r * others_weight / (w * trust_self)) - others_weight / trust_self)


@dataclass(frozen=True)
class ClosedFormNE:
    n: int
    trust: float
    t_star: float
    utility: float
    budget_floor: float


@dataclass(frozen=True)
class ContinuousProfile:
    """Delegations with real-valued token amounts, as built by the theorems."""

    delegations: tuple[Optional[int], ...]
    tokens: tuple[float, ...]
    closed_form: Optional[ClosedFormNE] = None

    def utility(self, instance: VsgInstance, i: int) -> float:
        return continuous_utility(instance, self.delegations, self.tokens, i)

    def rounded(self) -> StrategyProfile:
        """Nearest integer token counts (a zero rounds to abstaining)."""
        out = []
        for d, t in zip(self.delegations, self.tokens):
            k = int(round(t))
            out.append(ABSTAIN if d is None or k == 0 else Strategy(d, k))
        return StrategyProfile(tuple(out))


def single_validator_ne(n: int, r: float, c: float, p: float, q: float, qbar: float) -> ClosedFormNE:
    """Symmetric equilibrium of ``n`` homogeneous users on a single validator."""
    if int(n) != n or n < 2:
        raise ConditionError("at least two users", f"n={n}; with one user utility is linear in tokens")
    if not r > 0:
        raise ConditionError("profit must be positive", f"r={r}")
    if c < 0:
        raise ConditionError("commission must be non-negative", f"c={c}")
    if not q > qbar:
        raise ConditionError("accuracy must exceed error", f"q={q}, qbar={qbar}")
    trust = trust_hupe(n, q, qbar, p)
    w = c + (1.0 - trust)  # 1 - T is exact for T >= 1/2; keeps small w accurate
    if w <= 0.0:
        raise ConditionError("1 + c - T must be positive", f"c={c}, T={trust}")
    t_star = (n - 1) * r / (n * n * w)
    return ClosedFormNE(n=n, trust=trust, t_star=t_star, utility=r / (n * n), budget_floor=t_star * (1.0 + c))


def _homogeneous_users(instance: VsgInstance) -> tuple[float, float]:
    q, qbar = instance.users[0].accuracy, instance.users[0].error
    if any(u.accuracy != q or u.error != qbar for u in instance.users):
        raise ConditionError("homogeneous users", "all users must share accuracy and error")
    if not q > qbar:
        raise ConditionError("accuracy must exceed error", f"q={q}, qbar={qbar}")
    return q, qbar


def _perfect_evidence(instance: VsgInstance) -> None:
    if any(v.evidence_quality != 1.0 for v in instance.validators):
        raise ConditionError("perfect evidence", "every validator's evidence quality must be 1")


def _check_budgets(instance: VsgInstance, ne: ClosedFormNE) -> None:
    if ne.t_star < 1.0:
        raise ConditionError("equilibrium tokens must be at least 1", f"t*={ne.t_star:.6g}")
    for i, u in enumerate(instance.users):
        if u.budget < ne.budget_floor:
            raise ConditionError(
                "budget condition", f"user {i} has budget {u.budget} < required {ne.budget_floor:.6g}"
            )


def homogeneous_ne(instance: VsgInstance) -> ContinuousProfile:
    """All users on validator 0 with the single-validator token count."""
    v0 = instance.validators[0]
    if any(v.integrity != v0.integrity or v.commission != v0.commission for v in instance.validators):
        raise ConditionError("homogeneous validators", "all validators must share integrity and commission")
    _perfect_evidence(instance)
    q, qbar = _homogeneous_users(instance)
    if instance.n < 2:
        raise ConditionError("at least two users", f"n={instance.n}")
    ne = single_validator_ne(instance.n, instance.profit, v0.commission, v0.integrity, q, qbar)
    _check_budgets(instance, ne)
    return ContinuousProfile((0,) * instance.n, (ne.t_star,) * instance.n, ne)


def commission_free_ne(instance: VsgInstance) -> ContinuousProfile:
    """All users on the most trustworthy validator (lowest index on ties)."""
    if any(v.commission != 0.0 for v in instance.validators):
        raise ConditionError("commission-free", "every validator's commission must be 0")
    _perfect_evidence(instance)
    q, qbar = _homogeneous_users(instance)
    if instance.n < 2:
        raise ConditionError("at least two users", f"n={instance.n}")
    best = int(np.argmax(instance.integrity))
    ne = single_validator_ne(instance.n, instance.profit, 0.0, instance.validators[best].integrity, q, qbar)
    _check_budgets(instance, ne)
    return ContinuousProfile((best,) * instance.n, (ne.t_star,) * instance.n, ne)


def token_derivative(instance: VsgInstance, profile: ContinuousProfile, i: int, h: Optional[float] = None) -> float:
    """Central finite difference of user ``i``'s utility in their own tokens."""
    t = profile.tokens[i]
    h = h if h is not None else 1e-5 * max(1.0, t)
    if t - h <= 0.0:
        raise ValueError("finite-difference step reaches zero tokens")
    lo = list(profile.tokens)
    hi = list(profile.tokens)
    lo[i] -= h
    hi[i] += h
    return (
        continuous_utility(instance, profile.delegations, hi, i)
        - continuous_utility(instance, profile.delegations, lo, i)
    ) / (2.0 * h)


def deviation_gains(
    instance: VsgInstance,
    profile: ContinuousProfile,
    i: int,
    rng: np.random.Generator,
    samples: int = 200,
) -> np.ndarray:
    """Utility gains of random unilateral deviations with real token amounts.

    Each sample picks a validator uniformly and a token amount uniformly in
    the affordable range ``[0, b_i / (1 + c_j)]``.
    """
    base = profile.utility(instance, i)
    budget = instance.users[i].budget
    gains = np.empty(samples)
    for k in range(samples):
        j = int(rng.integers(instance.m))
        t = float(rng.uniform(0.0, budget / (1.0 + instance.validators[j].commission)))
        d = list(profile.delegations)
        tok = list(profile.tokens)
        d[i], tok[i] = j, t
        gains[k] = continuous_utility(instance, d, tok, i) - base
    return gains


def best_continuous_deviation(instance: VsgInstance, profile: ContinuousProfile, i: int) -> tuple[int, float, float]:
    """Best validator switch for user ``i`` when tokens are set optimally.

    Returns ``(validator, tokens, utility)`` using the continuous optimum for
    each candidate validator.
    """
    best = (-1, 0.0, 0.0)
    for j in range(instance.m):
        d = list(profile.delegations)
        d[i] = j
        tok = list(profile.tokens)
        tok[i] = 1.0
        active = [dd if tt > 0 else None for dd, tt in zip(d, tok)]
        trusts = _group_trusts(instance, active)
        others = sum(trusts[dd] * tt for k, (dd, tt) in enumerate(zip(active, tok)) if dd is not None and k != i)
        w = instance.validators[j].commission + (1.0 - trusts[j])
        if w <= 0.0 or trusts[j] <= 0.0:
            continue
        t = continuous_optimal_tokens(instance.profit, others, w, trusts[j])
        t = min(t, instance.users[i].budget / (1.0 + instance.validators[j].commission))
        if t <= 0.0:
            continue
        tok[i] = t
        u = continuous_utility(instance, d, tok, i)
        if u > best[2]:
            best = (j, t, u)
    return best
