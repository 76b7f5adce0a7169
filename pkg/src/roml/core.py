"""Instances, permutations and round streams for the random-order model.

An adversary fixes a multiset of loss vectors; a seeded uniform permutation
decides the order in which a :class:`RoundStream` hands them to the learner.
Three feedback channels are supported: full information, full information
with a fixed delay, and bandit feedback.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

MIXTURE_SUM_TOL = 1e-9
MIXTURE_CLAMP_TOL = 1e-12

# sub-stream tags; one trial seed feeds several independent generators
STREAM_PERMUTATION = 0
STREAM_BANDIT = 1
STREAM_TRAINING = 2
STREAM_INSTANCE = 3
STREAM_AUX = 4


class RomlError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(RomlError, ValueError):
    pass


class ValidationError(RomlError, ValueError):
    pass


class UsageError(RomlError, RuntimeError):
    pass


class NumericalError(RomlError, ArithmeticError):
    pass


def make_rng(seed: int, tag: int = STREAM_PERMUTATION) -> np.random.Generator:
    """Counter-based (Philox) generator keyed by ``(seed, tag)``."""
    if seed < 0 or seed >= 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(tag)])))


@dataclass(frozen=True)
class LossInstance:
    """The adversary's multiset of ``T`` loss vectors in ``[0, 1]^k``.

    Row order carries no meaning; only the multiset matters.
    """

    losses: np.ndarray

    def __post_init__(self):
        losses = np.array(self.losses, dtype=float)
        if losses.ndim != 2 or losses.shape[0] < 1 or losses.shape[1] < 1:
            raise ValidationError(f"losses must be a non-empty T x k matrix, got shape {losses.shape}")
        if not np.all(np.isfinite(losses)) or losses.min() < 0.0 or losses.max() > 1.0:
            raise ValidationError("loss entries must lie in [0, 1]")
        losses.setflags(write=False)
        object.__setattr__(self, "losses", losses)

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    @property
    def k(self) -> int:
        return self.losses.shape[1]

    def column_sums(self) -> np.ndarray:
        return self.losses.sum(axis=0)

    def best_action(self) -> int:
        return int(np.argmin(self.column_sums()))

    def benchmark(self) -> float:
        """Loss of the best fixed action in hindsight, ``min_a sum_t h_t(a)``."""
        return float(self.column_sums().min())

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"a{a + 1}" for a in range(self.k)])
            for t, row in enumerate(self.losses, start=1):
                writer.writerow([t] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "LossInstance":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[0] != "t" or any(h != f"a{i}" for i, h in enumerate(header[1:], start=1)):
                raise ValidationError(f"bad instance header: {header}")
            rows = [[float(v) for v in line[1:]] for line in reader if line]
        return cls(np.array(rows, dtype=float))


@dataclass(frozen=True)
class Permutation:
    """Uniform permutation of ``0..T-1`` regenerated bit-for-bit from ``seed``."""

    order: np.ndarray
    seed: int

    @classmethod
    def draw(cls, T: int, seed: int) -> "Permutation":
        if T < 1:
            raise ConfigurationError("T must be positive")
        # Generator.permutation is an in-place Fisher-Yates shuffle
        order = make_rng(seed, STREAM_PERMUTATION).permutation(T)
        order.setflags(write=False)
        return cls(order=order, seed=seed)

    def __len__(self) -> int:
        return len(self.order)


@dataclass(frozen=True)
class Full:
    pass


@dataclass(frozen=True)
class Delayed:
    d: int


@dataclass(frozen=True)
class Bandit:
    pass


FeedbackKind = Union[Full, Delayed, Bandit]


class Reveal(NamedTuple):
    """Feedback delivered at the end of one or more rounds.

    ``rounds`` holds the 1-based rounds the feedback belongs to. Under full or
    delayed feedback ``values`` is a ``(n, k)`` matrix of loss vectors; under
    bandit feedback it is the length-``n`` vector of ``l_t(a_t)``.
    """

    rounds: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.rounds)


def validate_mixture(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (k,):
        raise ValidationError(f"mixed action must have shape ({k},), got {x.shape}")
    if np.any(x < -MIXTURE_CLAMP_TOL):
        raise ValidationError(f"mixed action has negative entries: {x}")
    x = np.where(x < 0.0, 0.0, x)
    if abs(x.sum() - 1.0) > MIXTURE_SUM_TOL:
        raise ValidationError(f"mixed action sums to {x.sum()!r}, not 1")
    return x


@dataclass
class RoundStream:
    """Single-owner environment presenting ``instance`` rows in permuted order."""

    instance: LossInstance
    permutation: Permutation
    feedback: FeedbackKind = field(default_factory=Full)
    cursor: int = 1
    interaction_count: int = 0
    last_action: int | None = None
    _bandit_rng: np.random.Generator | None = field(default=None, repr=False)
    _revealed_through: int = 0

    @property
    def T(self) -> int:
        return self.instance.T

    @property
    def k(self) -> int:
        return self.instance.k

    @property
    def delay(self) -> int:
        return self.feedback.d if isinstance(self.feedback, Delayed) else 0

    @property
    def done(self) -> bool:
        return self.cursor > self.T

    @property
    def remaining(self) -> int:
        return self.T - self.cursor + 1

    def loss_at(self, t: int) -> np.ndarray:
        """Loss vector of an already-played round ``t`` (1-based)."""
        if not 1 <= t < self.cursor:
            raise UsageError(f"round {t} has not been played yet")
        return self.instance.losses[self.permutation.order[t - 1]]

    @property
    def pending(self) -> list[tuple[int, np.ndarray]]:
        """Delayed feedback not yet delivered, as ``(reveal_time, loss_vector)``."""
        if not isinstance(self.feedback, Delayed):
            return []
        rows = self.instance.losses
        order = self.permutation.order
        return [(t + self.delay, rows[order[t - 1]]) for t in range(self._revealed_through + 1, self.cursor)]

    def _check_room(self, n: int) -> None:
        if n < 1:
            raise UsageError("must play at least one round")
        if self.cursor + n - 1 > self.T:
            raise UsageError(f"cannot play {n} round(s) from round {self.cursor}: horizon is {self.T}")

    def _deliver(self, last_round: int) -> Reveal:
        """Feedback released at the end of ``last_round`` for full/delayed channels."""
        upto = min(last_round - self.delay, self.T)
        start = self._revealed_through + 1
        if upto < start:
            return Reveal(np.empty(0, dtype=int), np.empty((0, self.k)))
        rounds = np.arange(start, upto + 1)
        self._revealed_through = upto
        return Reveal(rounds, self.instance.losses[self.permutation.order[start - 1:upto]])

    def step(self, action) -> tuple[float, Reveal]:
        """Play one round with a pure action (int) or a mixed action (vector)."""
        incurred, reveal = self._play(action, 1)
        return float(incurred[0]), reveal

    def play_mixed(self, x, n: int) -> tuple[np.ndarray, Reveal]:
        """Play the same mixed action for ``n`` consecutive rounds."""
        return self._play(x, n)

    def play_pure(self, actions: Sequence[int]) -> tuple[np.ndarray, Reveal]:
        """Play the given pure actions on consecutive rounds."""
        actions = np.asarray(actions, dtype=int)
        if actions.ndim != 1:
            raise ValidationError("actions must be a 1-D sequence")
        return self._play_actions(actions)

    def _play(self, action, n: int) -> tuple[np.ndarray, Reveal]:
        if np.ndim(action) == 0:
            return self._play_actions(np.full(n, int(action)))
        x = validate_mixture(action, self.k)
        if isinstance(self.feedback, Bandit):
            if self._bandit_rng is None:
                raise UsageError("bandit stream has no sampling generator; build it with make_stream")
            return self._play_actions(self._bandit_rng.choice(self.k, size=n, p=x / x.sum()))
        self._check_room(n)
        start = self.cursor
        rows = self.instance.losses[self.permutation.order[start - 1:start - 1 + n]]
        incurred = rows @ x
        self.cursor += n
        self.interaction_count += n
        return incurred, self._deliver(self.cursor - 1)

    def _play_actions(self, actions: np.ndarray) -> tuple[np.ndarray, Reveal]:
        n = len(actions)
        self._check_room(n)
        if actions.min() < 0 or actions.max() >= self.k:
            raise ValidationError(f"actions must lie in 0..{self.k - 1}")
        start = self.cursor
        rows = self.instance.losses[self.permutation.order[start - 1:start - 1 + n]]
        incurred = rows[np.arange(n), actions]
        self.cursor += n
        self.interaction_count += n
        self.last_action = int(actions[-1])
        if isinstance(self.feedback, Bandit):
            return incurred, Reveal(np.arange(start, start + n), incurred.copy())
        return incurred, self._deliver(self.cursor - 1)

    def ordered_losses(self) -> np.ndarray:
        """Rows already played, in play order (for evaluation, not for learners)."""
        return self.instance.losses[self.permutation.order[: self.cursor - 1]]


def make_stream(instance: LossInstance, seed: int, feedback: FeedbackKind | None = None) -> RoundStream:
    """Build a fresh stream: seeded permutation, cursor at round 1, empty buffer."""
    feedback = Full() if feedback is None else feedback
    if isinstance(feedback, Delayed):
        if feedback.d < 0:
            raise ConfigurationError(f"delay must be non-negative, got {feedback.d}")
        if feedback.d >= instance.T:
            raise ConfigurationError(
                f"delay d={feedback.d} >= T={instance.T}: no feedback would arrive within the horizon")
    elif not isinstance(feedback, (Full, Bandit)):
        raise ConfigurationError(f"unknown feedback kind {feedback!r}")
    perm = Permutation.draw(instance.T, seed)
    bandit_rng = make_rng(seed, STREAM_BANDIT) if isinstance(feedback, Bandit) else None
    return RoundStream(instance=instance, permutation=perm, feedback=feedback, _bandit_rng=bandit_rng)
