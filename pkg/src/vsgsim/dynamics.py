"""Epsilon-greedy best response dynamics.

Each round visits every user once in a fresh random order.  The visited user
moves to a uniformly drawn best reply with probability ``epsilon`` and to a
uniformly drawn strictly-better (but not best) reply otherwise.  Updates are
sequential: later users react to earlier moves in the same round.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .game import ABSTAIN, GroupTrustCache, Strategy, StrategyProfile, VsgInstance, best_response_sets

log = logging.getLogger(__name__)

# Domain-separation tags mixed into the seed of each random stream.
_INIT_STREAM = 0x494E4954
_ORDER_STREAM = 0x5045524D
_SAMPLE_STREAM = 0x53414D50


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag]))


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    ROUND_LIMIT = "round_limit"


@dataclass(frozen=True)
class GbrdConfig:
    epsilon: float
    round_limit: int
    convergence_ratio: float = 0.01
    seed: int = 0
    mode: str = "relative"
    abstain: bool = True  # False drops abstention from every user's choices

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if int(self.round_limit) != self.round_limit or self.round_limit < 1:
            raise ValueError(f"round_limit must be a positive integer, got {self.round_limit}")
        if not self.convergence_ratio >= 0.0:
            raise ValueError(f"convergence_ratio must be non-negative, got {self.convergence_ratio}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode not in ("relative", "absolute"):
            raise ValueError(f"mode must be 'relative' or 'absolute', got {self.mode!r}")

    def converged(self, before: np.ndarray, after: np.ndarray) -> bool:
        delta = np.abs(after - before)
        if self.mode == "relative":
            bound = self.convergence_ratio * np.maximum(np.abs(before), 1.0)
        else:
            bound = self.convergence_ratio
        return bool(np.all(delta <= bound))


@dataclass(frozen=True)
class Move:
    user: int
    before: Strategy
    after: Strategy
    greedy: bool  # drawn from the best-reply set
    utility_before: float
    utility_after: float


@dataclass
class RoundRecord:
    order: tuple[int, ...]
    moves: list[Move]
    profile: StrategyProfile
    utilities: np.ndarray


@dataclass
class Trajectory:
    initial: StrategyProfile
    initial_utilities: np.ndarray
    rounds: list[RoundRecord] = field(default_factory=list)
    terminated_by: Optional[Termination] = None

    @property
    def final(self) -> StrategyProfile:
        return self.rounds[-1].profile if self.rounds else self.initial


def init_profile(instance: VsgInstance, rng: np.random.Generator) -> StrategyProfile:
    """Random validator per user with a uniform affordable token count (0 abstains)."""
    out = []
    for i in range(instance.n):
        j = int(rng.integers(instance.m))
        t = int(rng.integers(instance.max_tokens[i, j] + 1))
        out.append(ABSTAIN if t == 0 else Strategy(j, t))
    return StrategyProfile(tuple(out))


def run_gbrd(
    instance: VsgInstance,
    config: GbrdConfig,
    initial: Optional[StrategyProfile] = None,
) -> tuple[StrategyProfile, Trajectory]:
    """Run the dynamics until utilities settle or the round limit is hit."""
    if initial is None:
        initial = init_profile(instance, stream(config.seed, _INIT_STREAM))
    order_rng = stream(config.seed, _ORDER_STREAM)
    sample_rng = stream(config.seed, _SAMPLE_STREAM)

    cache = GroupTrustCache(instance, initial)
    prev_u = cache.utilities()
    traj = Trajectory(initial=initial, initial_utilities=prev_u)

    for s in range(config.round_limit):
        order = tuple(int(i) for i in order_rng.permutation(instance.n))
        moves = []
        for i in order:
            br = best_response_sets(instance, None, i, cache, allow_abstain=config.abstain)
            greedy = bool(sample_rng.random() < config.epsilon)
            if not greedy and br.better_validators.size == 0:
                greedy = True
            if greedy:
                new = br.best_at(int(sample_rng.integers(br.best_validators.size)))
            else:
                new = br.better_at(int(sample_rng.integers(br.better_validators.size)))
            before = cache.strategies[i]
            cache.apply(i, new)
            cache.commit()
            moves.append(Move(i, before, new, greedy, br.current_utility, cache.utility(i)))
        u = cache.utilities()
        traj.rounds.append(RoundRecord(order, moves, cache.profile, u))
        done = config.converged(prev_u, u)
        log.debug("round %d: mean utility %.6g, converged=%s", s + 1, u.mean(), done)
        prev_u = u
        if done:
            traj.terminated_by = Termination.CONVERGED
            break
    else:
        traj.terminated_by = Termination.ROUND_LIMIT
    return traj.final, traj
