import numpy as np
import pytest

from helpers import brute_force_replies, make_instance, random_small_instance
from vsgsim.dynamics import (
    _INIT_STREAM,
    _ORDER_STREAM,
    _SAMPLE_STREAM,
    GbrdConfig,
    Termination,
    init_profile,
    run_gbrd,
    stream,
)
from vsgsim.game import ABSTAIN, StrategyProfile, best_response_sets, is_nash, utility


def test_config_validation():
    for bad in [dict(epsilon=1.5, round_limit=1), dict(epsilon=0.5, round_limit=0), dict(epsilon=0.5, round_limit=2, mode="x")]:
        with pytest.raises(ValueError):
            GbrdConfig(**bad)


def test_relative_convergence_has_unit_floor():
    cfg = GbrdConfig(epsilon=1.0, round_limit=3, convergence_ratio=0.01)
    assert cfg.converged(np.array([0.0, 100.0]), np.array([0.01, 101.0]))
    assert not cfg.converged(np.array([0.0, 100.0]), np.array([0.02, 100.0]))
    absolute = GbrdConfig(epsilon=1.0, round_limit=3, convergence_ratio=0.01, mode="absolute")
    assert not absolute.converged(np.array([100.0]), np.array([101.0]))


# -- initialization ---------------------------------------------------------------


def test_init_profile_abstains_when_nothing_is_affordable():
    inst = make_instance([(0.8, 0.3, 0.5)] * 5, [(0.7, 0.9, 0.1)] * 3)
    for seed in range(20):
        assert init_profile(inst, np.random.default_rng(seed)) == StrategyProfile.all_abstain(5)


def test_init_profile_is_deterministic_and_feasible():
    rng = np.random.default_rng(0)
    inst = random_small_instance(rng, n_max=20, m_max=5, budget_max=80)
    a = init_profile(inst, stream(7, _INIT_STREAM))
    b = init_profile(inst, stream(7, _INIT_STREAM))
    assert a == b
    a.validate(inst)


def test_init_tokens_are_uniform_on_affordable_range():
    inst = make_instance([(0.8, 0.3, 70.0)] * 1000, [(0.7, 0.9, 0.1)])
    prof = init_profile(inst, np.random.default_rng(3))
    tokens = np.array(prof.tokens, dtype=float)
    k = 63  # floor(70 / 1.1)
    mean, se = k / 2, np.sqrt(((k + 1) ** 2 - 1) / 12 / 1000)
    assert abs(tokens.mean() - mean) <= 3 * se
    assert tokens.max() <= k


# -- dynamics -----------------------------------------------------------------------


def _sequential_oracle(inst, initial, seed):
    """One greedy round replayed with brute-force best replies."""
    order = stream(seed, _ORDER_STREAM).permutation(inst.n)
    sample = stream(seed, _SAMPLE_STREAM)
    prof = initial
    for i in order:
        sample.random()  # the epsilon coin, always greedy here
        best, _, _, _ = brute_force_replies(inst, prof, int(i))
        prof = prof.replace(int(i), best[int(sample.integers(len(best)))])
    return prof


def test_greedy_round_matches_sequential_oracle():
    rng = np.random.default_rng(99)
    for seed in range(25):
        inst = random_small_instance(rng, n_max=4, m_max=3, budget_max=15)
        cfg = GbrdConfig(epsilon=1.0, round_limit=1, seed=seed)
        initial = init_profile(inst, stream(seed, _INIT_STREAM))
        final, traj = run_gbrd(inst, cfg)
        assert traj.initial == initial
        assert final == _sequential_oracle(inst, initial, seed)


def test_runs_are_reproducible():
    rng = np.random.default_rng(4)
    inst = random_small_instance(rng, n_max=12, m_max=4, budget_max=40)
    cfg = GbrdConfig(epsilon=0.7, round_limit=4, seed=123)
    f1, t1 = run_gbrd(inst, cfg)
    f2, t2 = run_gbrd(inst, cfg)
    assert f1 == f2
    assert [r.order for r in t1.rounds] == [r.order for r in t2.rounds]
    for a, b in zip(t1.rounds, t2.rounds):
        assert np.array_equal(a.utilities, b.utilities)


def test_equilibrium_start_converges_immediately():
    inst = make_instance([(0.8, 0.3, 100.0)], [(0.8, 1.0, 0.2), (0.6, 1.0, 0.1)])
    start = StrategyProfile(best_response_sets(inst, StrategyProfile.all_abstain(1), 0).best)
    assert is_nash(inst, start).equilibrium
    final, traj = run_gbrd(inst, GbrdConfig(epsilon=1.0, round_limit=5), start)
    assert final == start
    assert len(traj.rounds) == 1
    assert traj.terminated_by is Termination.CONVERGED


def test_every_move_weakly_improves_the_mover():
    rng = np.random.default_rng(8)
    inst = random_small_instance(rng, n_max=10, m_max=3, budget_max=30)
    _, traj = run_gbrd(inst, GbrdConfig(epsilon=0.5, round_limit=4, seed=2))
    for rec in traj.rounds:
        for mv in rec.moves:
            assert mv.utility_after >= mv.utility_before - 1e-9 * max(1.0, abs(mv.utility_before))


def test_non_greedy_moves_are_strictly_better_but_not_best():
    rng = np.random.default_rng(21)
    inst = random_small_instance(rng, n_max=8, m_max=3, budget_max=30)
    _, traj = run_gbrd(inst, GbrdConfig(epsilon=0.0, round_limit=3, seed=5))
    prof = traj.initial
    for rec in traj.rounds:
        for mv in rec.moves:
            best, better, _, _ = brute_force_replies(inst, prof, mv.user)
            assert mv.after in (best if mv.greedy else better)
            if not better:
                assert mv.greedy
            prof = prof.replace(mv.user, mv.after)


def test_trajectory_respects_round_limit_and_records_state():
    rng = np.random.default_rng(13)
    inst = random_small_instance(rng, n_max=10, m_max=3, budget_max=30)
    final, traj = run_gbrd(inst, GbrdConfig(epsilon=0.8, round_limit=2, seed=1, convergence_ratio=0.0))
    assert 1 <= len(traj.rounds) <= 2
    assert traj.final == final
    for rec in traj.rounds:
        assert sorted(rec.order) == list(range(inst.n))
        expected = [utility(inst, rec.profile, i) for i in range(inst.n)]
        np.testing.assert_allclose(rec.utilities, expected, rtol=1e-9, atol=1e-9)


def test_no_abstain_mode_keeps_everyone_delegating():
    inst = make_instance([(0.8, 0.3, 10.0)] * 6, [(0.6, 1.0, 0.3), (0.7, 0.9, 0.2)], r=0.5)
    final, _ = run_gbrd(inst, GbrdConfig(epsilon=1.0, round_limit=2, seed=0, abstain=False))
    assert ABSTAIN not in final.strategies
    abstaining, _ = run_gbrd(inst, GbrdConfig(epsilon=1.0, round_limit=2, seed=0))
    assert ABSTAIN in abstaining.strategies
