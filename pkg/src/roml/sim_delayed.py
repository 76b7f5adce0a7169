"""Simulation template for prediction with a fixed feedback delay.

Round 1 is played blind. Test block ``i`` then occupies ``2**i`` rounds
starting at ``2**i + i*d + 1`` and is followed by a buffer of ``d`` rounds,
long enough for the block's feedback to arrive. Before each block a fresh
full-feedback learner is trained on ``2**i`` draws with replacement from
every loss observed so far (buffer rounds excluded) and its empirical play
frequencies are replayed on the real rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .concentration import PrecisionSchedule, ScheduleKind, block_eps
from .core import (ConfigurationError, Delayed, LossInstance, UsageError, make_rng, make_stream,
                   STREAM_TRAINING)
from .experts import FollowTheLeader
from .regret import RegretReport, evaluate_regret


@dataclass
class ObservedPool:
    """Multiset ``O`` of revealed loss vectors, kept with the rounds they came from."""

    k: int
    _rows: list = field(default_factory=list)
    _rounds: list = field(default_factory=list)
    _size: int = 0

    def add(self, t: int, loss) -> None:
        self.add_many([t], np.asarray(loss, dtype=float)[None, :])

    def add_many(self, rounds, rows) -> None:
        rounds = np.asarray(rounds, dtype=int)
        if len(rounds) == 0:
            return
        self._rounds.append(rounds)
        self._rows.append(np.asarray(rows, dtype=float).reshape(len(rounds), self.k))
        self._size += len(rounds)

    @property
    def size(self) -> int:
        return self._size

    @property
    def rounds(self) -> list[int]:
        return [int(t) for chunk in self._rounds for t in chunk]

    def matrix(self) -> np.ndarray:
        if not self._rows:
            return np.empty((0, self.k))
        if len(self._rows) > 1:
            self._rows = [np.concatenate(self._rows)]
            self._rounds = [np.concatenate(self._rounds)]
        return self._rows[0]

    def exact_mean(self) -> np.ndarray:
        """Per-action mean of the uniform distribution on the pool, correctly rounded."""
        if not self._size:
            raise UsageError("pool is empty")
        mat = self.matrix()
        return np.array([math.fsum(mat[:, a]) for a in range(self.k)]) / self._size


@dataclass(frozen=True)
class BlockPlan:
    index: int
    train_length: int
    start: int
    stop: int          # last test round, inclusive, already truncated at T
    buffer_stop: int   # last buffer round, inclusive, truncated at T

    @property
    def test_rounds(self) -> range:
        return range(self.start, self.stop + 1)

    @property
    def buffer_rounds(self) -> range:
        return range(self.stop + 1, self.buffer_stop + 1)


def plan_blocks(T: int, d: int) -> list[BlockPlan]:
    """Test blocks and buffers tiling rounds ``2..T`` in order."""
    plans = []
    i = 0
    while True:
        start = 2**i + i * d + 1
        if start > T:
            break
        stop = min(start + 2**i - 1, T)
        plans.append(BlockPlan(index=i, train_length=2**i, start=start, stop=stop,
                               buffer_stop=min(stop + d, T)))
        i += 1
    return plans


def train_counts(pool: ObservedPool, train_length: int, rng: np.random.Generator,
                 routine: Callable = FollowTheLeader, replay: bool = False) -> np.ndarray:
    """Train a fresh ``routine`` on i.i.d. draws from the pool; return play frequencies.

    Training never touches the environment. A routine exposing
    ``batch_counts`` is run vectorised unless ``replay`` is set, in which case
    it is stepped one sample at a time through ``choose``/``update``.
    """
    if pool.size == 0:
        raise UsageError("cannot iid-ify an empty pool: no feedback has arrived yet")
    if train_length < 1:
        raise ConfigurationError("train length must be positive")
    samples = pool.matrix()[rng.integers(0, pool.size, size=train_length)]
    batch = getattr(routine, "batch_counts", None)
    if batch is not None and not replay:
        counts = np.asarray(batch(samples), dtype=float)
    else:
        learner = routine(pool.k)
        counts = np.zeros(pool.k)
        for row in samples:
            counts[learner.choose()] += 1
            learner.update(row)
    return counts / train_length


def run_sim_delayed(instance: LossInstance, d: int, seed: int, routine: Callable = FollowTheLeader,
                    check_unbiased: bool = False) -> RegretReport:
    """Run Simulation for delayed feedback (delay ``d``) on one random order.

    With ``check_unbiased`` the pool mean at every block start is compared,
    bit for bit, against an independent recomputation from the play order.
    """
    if d < 0:
        raise ConfigurationError("delay must be non-negative")
    T, k = instance.T, instance.k
    stream = make_stream(instance, seed, Delayed(d))
    rng = make_rng(seed, STREAM_TRAINING)
    plans = plan_blocks(T, d)
    kept = np.zeros(T + 1, dtype=bool)
    kept[1] = True
    for plan in plans:
        kept[plan.start:plan.stop + 1] = True

    pool = ObservedPool(k)
    incurred = np.empty(T)
    actions_mixed = np.empty((T, k))
    eps, sizes = [], []

    def absorb(reveal):
        # buffer-round losses are discarded
        mask = kept[reveal.rounds]
        pool.add_many(reveal.rounds[mask], reveal.values[mask])

    loss, reveal = stream.step(0)
    incurred[0] = loss
    actions_mixed[0] = np.eye(k)[0]
    absorb(reveal)
    schedule = PrecisionSchedule(ScheduleKind.DELAYED, T) if T > 1 else None

    for plan in plans:
        if pool.size:
            if check_unbiased:
                _assert_unbiased(pool, stream, plan, plans)
            x = train_counts(pool, plan.train_length, rng, routine)
        else:
            # only block 0 with d >= 1: l_1 has not arrived yet, play blind again
            x = np.eye(k)[0]
        sizes.append(pool.size)
        eps.append(block_eps(schedule, plan.index))
        for lo, hi in ((plan.start, plan.stop), (plan.stop + 1, plan.buffer_stop)):
            if hi < lo:
                continue
            losses, reveal = stream.play_mixed(x, hi - lo + 1)
            incurred[lo - 1:hi] = losses
            actions_mixed[lo - 1:hi] = x
            absorb(reveal)

    if stream.interaction_count != T:
        raise AssertionError(f"stream saw {stream.interaction_count} interactions, expected {T}")
    diagnostics = {"block_eps": eps, "pool_sizes": sizes, "blocks": len(plans), "d": d}
    report = evaluate_regret(incurred, instance, "delayed", order=stream.permutation.order,
                             seed=seed, diagnostics=diagnostics)
    report.diagnostics["mixed_actions"] = actions_mixed
    return report


def _assert_unbiased(pool: ObservedPool, stream, plan: BlockPlan, plans: list[BlockPlan]) -> None:
    expected_rounds = np.concatenate(
        [[1]] + [np.arange(p.start, p.stop + 1) for p in plans if p.index < plan.index]).astype(int)
    if stream.cursor <= expected_rounds.max():
        raise AssertionError("expected rounds have not been played")
    rows = stream.instance.losses[stream.permutation.order[expected_rounds - 1]]
    expected = np.array([math.fsum(rows[:, a]) for a in range(rows.shape[1])]) / len(expected_rounds)
    got = pool.exact_mean()
    pool.matrix()
    if not np.array_equal(np.sort(pool._rounds[0]), expected_rounds) or not np.array_equal(got, expected):
        raise AssertionError(f"pool mean at block {plan.index} is biased: {got} != {expected}")
    if plan.index >= 1 and pool.size != 2**plan.index:
        raise AssertionError(f"pool at block {plan.index} holds {pool.size} losses, expected {2**plan.index}")
