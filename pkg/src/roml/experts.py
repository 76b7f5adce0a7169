"""Prediction with experts: Follow-The-Leader and the Birthday-Test learner.

Birthday-Test plays action 0 while the losses of action 0 look like
draws without replacement from the grid ``{1/T, ..., T/T}``; at the first
off-grid value or repeated value (the stopping time tau) it restarts as a
fresh Follow-The-Leader. It is no-regret on i.i.d. inputs and linear-regret
on a random-order instance whose first column is exactly that grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigurationError, RoundStream, make_rng, STREAM_AUX

SUPPORT_TOL = 1e-9


@dataclass
class FollowTheLeader:
    """Running loss sums of a full-feedback FTL learner."""

    k: int
    cumulative: np.ndarray = None
    rounds: int = 0

    def __post_init__(self):
        if self.cumulative is None:
            self.cumulative = np.zeros(self.k)
        else:
            self.cumulative = np.asarray(self.cumulative, dtype=float)

    def choose(self) -> int:
        return ftl_choose(self)

    def update(self, loss) -> None:
        self.cumulative += loss
        self.rounds += 1

    @staticmethod
    def batch_counts(samples: np.ndarray) -> np.ndarray:
        """Play counts of a fresh FTL fed ``samples`` row by row."""
        return ftl_play_counts(samples)


FtlState = FollowTheLeader


def ftl_choose(state: FollowTheLeader) -> int:
    # np.argmin returns the first minimiser, i.e. the lowest index on ties
    return int(np.argmin(state.cumulative))


def ftl_actions(losses: np.ndarray) -> np.ndarray:
    """Actions FTL takes on each row of ``losses`` (action t sees rows < t only)."""
    losses = np.asarray(losses, dtype=float)
    n, k = losses.shape
    prefix = np.zeros((n, k))
    if n > 1:
        np.cumsum(losses[:-1], axis=0, out=prefix[1:])
    return np.argmin(prefix, axis=1)


def ftl_play_counts(samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    return np.bincount(ftl_actions(samples), minlength=samples.shape[1])


def support_key(value: float, T: int) -> int | None:
    """Grid index ``i`` with ``value == i/T`` (``1 <= i <= T``), else ``None``."""
    scaled = value * T
    i = round(scaled)
    if abs(scaled - i) > SUPPORT_TOL or i < 1 or i > T:
        return None
    return int(i)


@dataclass
class BirthdayState:
    T: int
    k: int
    seen: set = field(default_factory=set)
    stopped: bool = False
    stop_time: int | None = None
    rounds: int = 0
    inner: FollowTheLeader | None = None

    def __post_init__(self):
        if self.inner is None:
            self.inner = FollowTheLeader(self.k)

    def choose(self) -> int:
        return self.inner.choose() if self.stopped else 0


def birthday_step(state: BirthdayState, loss, T: int | None = None) -> int:
    """Feed the loss vector of the round just played; return the next action."""
    T = state.T if T is None else T
    state.rounds += 1
    if state.stopped:
        state.inner.update(loss)
    else:
        key = support_key(float(loss[0]), T)
        if key is None or key in state.seen:
            state.stopped = True
            state.stop_time = state.rounds
        else:
            state.seen.add(key)
    return state.choose()


def run_birthday_test(stream: RoundStream) -> tuple[np.ndarray, np.ndarray, int | None]:
    """Play Birthday-Test on a full-feedback stream.

    Returns the per-round incurred losses, actions and the stopping time.
    """
    state = BirthdayState(T=stream.T, k=stream.k)
    incurred = np.empty(stream.T)
    actions = np.empty(stream.T, dtype=int)
    action = state.choose()
    for t in range(stream.T):
        loss, reveal = stream.step(action)
        incurred[t] = loss
        actions[t] = action
        action = birthday_step(state, reveal.values[0])
    return incurred, actions, state.stop_time


def run_ftl(stream: RoundStream) -> tuple[np.ndarray, np.ndarray]:
    state = FollowTheLeader(stream.k)
    incurred = np.empty(stream.T)
    actions = np.empty(stream.T, dtype=int)
    for t in range(stream.T):
        action = state.choose()
        loss, reveal = stream.step(action)
        incurred[t] = loss
        actions[t] = action
        state.update(reveal.values[0])
    return incurred, actions


def expected_tau_exact(T: int) -> float:
    """Exact ``E[tau] = sum_{t=0}^{T} T!/((T-t)! T^t)`` for uniform draws on ``T`` values."""
    if T < 1 or T > 10**6:
        raise ConfigurationError(f"T must lie in [1, 1e6], got {T}")
    # term_t = prod_{j<t} (T-j)/T, accumulated incrementally
    ratios = (T - np.arange(T, dtype=float)) / T
    terms = np.cumprod(ratios)
    return math.fsum(terms) + 1.0


def sample_tau(T: int, rng: np.random.Generator) -> int:
    """One draw of tau when action 0 sees i.i.d. uniform grid values."""
    seen = set()
    t = 0
    while True:
        t += 1
        key = support_key(rng.integers(1, T + 1) / T, T)
        if key is None or key in seen:
            return t
        seen.add(key)


def simulate_tau(T: int, trials: int, seed: int) -> np.ndarray:
    rng = make_rng(seed, STREAM_AUX)
    return np.array([sample_tau(T, rng) for _ in range(trials)])
