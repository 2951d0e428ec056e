"""Shared builders and brute-force oracles for the test suite."""

import itertools
import math

import numpy as np

from vsgsim.game import ABSTAIN, Strategy, StrategyProfile, VsgInstance, affordable_tokens, utility
from vsgsim.trust import UserParams, ValidatorParams


def make_instance(users, validators, r=30.0):
    """``users``: (q, qbar, budget) triples; ``validators``: (p, z, c) triples."""
    return VsgInstance(
        tuple(UserParams(i, q, qb, b) for i, (q, qb, b) in enumerate(users)),
        tuple(ValidatorParams(j, p, z, c) for j, (p, z, c) in enumerate(validators)),
        r,
    )


def two_user_game(r=30.0, budget=1000.0):
    """Two identical users, two validators with p = (0.8, 0.6), c = (0.2, 0.1)."""
    return make_instance([(0.8, 0.3, budget)] * 2, [(0.8, 1.0, 0.2), (0.6, 1.0, 0.1)], r)


def random_small_instance(rng, n_max=5, m_max=3, budget_max=20, r=None):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    users = [
        (float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 0.5)), float(rng.uniform(1.0, budget_max)))
        for _ in range(n)
    ]
    validators = [
        (float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 0.3)))
        for _ in range(m)
    ]
    return make_instance(users, validators, float(rng.uniform(5.0, 60.0)) if r is None else r)


def random_profile(instance, rng):
    out = []
    for i in range(instance.n):
        j = int(rng.integers(instance.m))
        t = int(rng.integers(instance.max_tokens[i, j] + 1))
        out.append(ABSTAIN if t == 0 else Strategy(j, t))
    return StrategyProfile(tuple(out))


def all_strategies(instance, i):
    """User ``i``'s whole strategy space in canonical order (abstain first)."""
    yield ABSTAIN
    for j, v in enumerate(instance.validators):
        for t in range(1, affordable_tokens(instance.users[i].budget, v.commission) + 1):
            yield Strategy(j, t)


def brute_force_replies(instance, profile, i, rtol=1e-12):
    """Best and strictly-better replies by evaluating every strategy from scratch."""
    scored = [(s, utility(instance, profile.replace(i, s), i)) for s in all_strategies(instance, i)]
    u_cur = utility(instance, profile, i)
    u_max = max(u for _, u in scored)
    tol = rtol * max(1.0, abs(u_max))
    best = [s for s, u in scored if u >= u_max - tol]
    better = [s for s, u in scored if u > u_cur + tol and u < u_max - tol]
    return best, better, u_max, u_cur


def grid_profiles(instance):
    """Every strategy profile of a tiny game."""
    spaces = [list(all_strategies(instance, i)) for i in range(instance.n)]
    for combo in itertools.product(*spaces):
        yield StrategyProfile(combo)


def isclose(a, b, rel=1e-9, abs_=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)


def rng(seed=0):
    return np.random.default_rng(seed)
