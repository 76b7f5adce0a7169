import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roml.core import ConfigurationError, Full, LossInstance, Permutation, make_rng, make_stream
from roml.experts import (BirthdayState, FollowTheLeader, birthday_step, expected_tau_exact, ftl_actions,
                          ftl_choose, ftl_play_counts, run_birthday_test, run_ftl, sample_tau, simulate_tau,
                          support_key)
from roml.harness import InstanceSpec, generate_instance

# 40-digit factorial-sum evaluations, frozen
TAU_EXACT = {
    3: 2.888888888888888888888888888888888888889,
    10: 4.66021568,
    100: 13.20996063021598030025313295681501299841,
    1000: 40.30321292617815453382123025347902960675,
}


def enumerate_tau(T: int) -> Fraction:
    """E[tau] by walking every sequence of uniform draws until the first repeat."""
    def walk(seen: tuple, prob: Fraction) -> Fraction:
        total = Fraction(0)
        for v in range(T):
            p = prob / T
            if v in seen:
                total += p * (len(seen) + 1)
            else:
                total += walk(seen + (v,), p)
        return total
    return walk((), Fraction(1))


def test_ftl_choose_examples():
    assert ftl_choose(FollowTheLeader(2, np.array([0.2, 0.5]))) == 0
    assert ftl_choose(FollowTheLeader(2, np.array([0.3, 0.3]))) == 0
    assert ftl_choose(FollowTheLeader(3, np.array([0.3, 0.1, 0.1]))) == 1


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(1, 6))
def test_ftl_choose_matches_brute_force(seed, k):
    rows = make_rng(seed).integers(0, 3, size=(10, k)) / 2
    state = FollowTheLeader(k)
    for row in rows:
        state.update(row)
    sums = [sum(r[a] for r in rows) for a in range(k)]
    best = min(range(k), key=lambda a: (sums[a], a))
    assert ftl_choose(state) == best
    assert np.all(state.cumulative >= 0) and np.all(state.cumulative <= state.rounds)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_vectorised_ftl_matches_stepping(seed):
    rows = make_rng(seed).integers(0, 2, size=(40, 3)).astype(float)
    state = FollowTheLeader(3)
    stepped = []
    for row in rows:
        stepped.append(state.choose())
        state.update(row)
    assert list(ftl_actions(rows)) == stepped
    assert list(ftl_play_counts(rows)) == list(np.bincount(stepped, minlength=3))


def test_run_ftl_matches_vectorised_actions():
    inst = LossInstance(make_rng(2).random((64, 3)))
    stream = make_stream(inst, 11, Full())
    incurred, actions = run_ftl(stream)
    order = Permutation.draw(64, 11).order
    assert np.array_equal(actions, ftl_actions(inst.losses[order]))
    assert np.array_equal(incurred, inst.losses[order, actions])


def test_support_key():
    assert support_key(0.3, 10) == 3
    assert support_key(0.33, 10) is None
    assert support_key(0.0, 10) is None
    assert support_key(1.0, 10) == 10
    assert support_key(0.1 + 0.2, 10) == 3


def test_birthday_duplicate_stops_at_two():
    state = BirthdayState(T=10, k=2)
    assert state.choose() == 0
    assert birthday_step(state, np.array([0.3, 0.9])) == 0
    assert not state.stopped
    # duplicate: tau = 2, round 3 is played by a fresh FTL that has seen nothing yet
    assert birthday_step(state, np.array([0.3, 0.0])) == 0
    assert state.stopped and state.stop_time == 2
    assert state.inner.rounds == 0
    assert birthday_step(state, np.array([0.5, 0.0])) == 1
    assert state.stop_time == 2


def test_birthday_off_grid_stops_immediately():
    state = BirthdayState(T=10, k=2)
    birthday_step(state, np.array([0.33, 0.1]))
    assert state.stopped and state.stop_time == 1


def test_birthday_plays_action_zero_before_tau_for_many_actions():
    state = BirthdayState(T=10, k=4)
    for v in (0.1, 0.2, 0.3):
        assert birthday_step(state, np.array([v, 0.0, 0.0, 0.0])) == 0


@pytest.mark.parametrize("T", [4, 17, 64])
def test_birthday_adversarial_regret_is_half_horizon(T):
    inst = generate_instance(InstanceSpec("birthday_adversarial", T=T))
    assert sorted(inst.losses[:, 0]) == [i / T for i in range(1, T + 1)]
    for seed in range(3):
        stream = make_stream(inst, seed, Full())
        incurred, actions, tau = run_birthday_test(stream)
        assert tau is None
        assert np.all(actions == 0)
        assert math.fsum(incurred) == pytest.approx((T + 1) / 2, abs=1e-12)


def test_expected_tau_small_cases_match_enumeration():
    assert expected_tau_exact(1) == 2.0
    assert expected_tau_exact(2) == 2.5
    for T in (1, 2, 3, 4):
        assert expected_tau_exact(T) == pytest.approx(float(enumerate_tau(T)), rel=1e-15)


@pytest.mark.parametrize("T", sorted(TAU_EXACT))
def test_expected_tau_matches_high_precision(T):
    assert expected_tau_exact(T) == pytest.approx(TAU_EXACT[T], rel=1e-13)


def test_expected_tau_asymptotics_and_domain():
    ratio = expected_tau_exact(10**4) / 100
    assert 1.15 <= ratio <= 1.35
    assert abs(ratio - math.sqrt(2 * math.pi) / 2) < 0.01
    assert math.isfinite(expected_tau_exact(10**6))
    with pytest.raises(ConfigurationError):
        expected_tau_exact(0)


@settings(max_examples=50, deadline=None)
@given(T=st.integers(100, 10**5))
def test_expected_tau_below_two_root_t(T):
    assert expected_tau_exact(T) <= 2 * math.sqrt(T)


def test_tau_monte_carlo_agrees():
    taus = simulate_tau(50, 5000, seed=3)
    se = taus.std(ddof=1) / math.sqrt(len(taus))
    assert abs(taus.mean() - expected_tau_exact(50)) <= 3 * se
    assert sample_tau(1, make_rng(0)) == 2


def test_tau_from_birthday_stream_matches_direct_sampler():
    # on a with-replacement grid instance the learner's tau is the first repeat in play order
    inst = generate_instance(InstanceSpec("iid_uniform_support", T=200, seed=5))
    stream = make_stream(inst, 8, Full())
    _, actions, tau = run_birthday_test(stream)
    col = inst.losses[stream.permutation.order, 0]
    keys = [round(v * 200) for v in col]
    first_repeat = next(t for t in range(1, 201) if keys[t - 1] in keys[:t - 1])
    assert tau == first_repeat
    assert np.all(actions[:tau] == 0)


def test_ftl_sublinear_on_iid_instance():
    def mean_regret(T):
        L = (make_rng(7, 3).random((T, 2)) < np.array([0.4, 0.5])).astype(float)
        bench = L.sum(axis=0).min()
        out = []
        for s in range(100):
            Lp = L[Permutation.draw(T, s).order]
            out.append(Lp[np.arange(T), ftl_actions(Lp)].sum() - bench)
        return np.mean(out)

    regrets = [mean_regret(2**e) for e in range(10, 14)]
    for a, b in zip(regrets, regrets[1:]):
        assert b / a < 1.9


def test_birthday_enumerated_regret_small_iid():
    # every instance with T=2 values per grid point, all orders: regret >= 0 on average
    T = 2
    for col in product([0.5, 1.0], repeat=T):
        inst = LossInstance(np.column_stack([col, np.zeros(T)]))
        regs = []
        for seed in range(4):
            incurred, _, _ = run_birthday_test(make_stream(inst, seed, Full()))
            regs.append(incurred.sum() - inst.benchmark())
        assert min(regs) >= 0
