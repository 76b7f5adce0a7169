"""Without-replacement concentration bounds and per-block precision schedules.

All logarithms are natural. Block counts use base 2 (see :func:`num_blocks`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")


def hoeffding_wor_eps(s: int, delta: float) -> float:
    """Deviation ``sqrt(log(2/delta) / s)`` of a size-``s`` sample mean."""
    if s < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {s}")
    _check_delta(delta)
    return math.sqrt(math.log(2.0 / delta) / s)


def serfling_eps(s: int, T: int, delta: float) -> float:
    """Serfling's finite-population refinement of :func:`hoeffding_wor_eps`."""
    if s < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {s}")
    if s > T:
        raise ConfigurationError(f"sample count {s} exceeds population size {T}")
    _check_delta(delta)
    return math.sqrt((1.0 - (s - 1) / T) * math.log(2.0 / delta) / (2.0 * s))


def num_blocks(T: int) -> int:
    """``ceil(log2 T)``, the number of geometric blocks after the first round."""
    if T < 1:
        raise ConfigurationError("T must be positive")
    return (int(T) - 1).bit_length()


class ScheduleKind(enum.Enum):
    DELAYED = "delayed"
    SSE = "sse"
    CONSTRAINED = "constrained"


@dataclass(frozen=True)
class PrecisionSchedule:
    """Parameters of one per-block precision schedule.

    ``T`` may be any real > 1 so that schedules can be evaluated off the
    integer grid; ``k``, ``m`` and ``delta`` are only read by the kinds that
    need them.
    """

    kind: ScheduleKind
    T: float
    k: int = 1
    m: int = 1
    delta: float = 0.1

    def __post_init__(self):
        if not self.T > 1:
            raise ConfigurationError(f"schedule needs T > 1, got {self.T}")
        if self.kind is ScheduleKind.SSE and self.k < 1:
            raise ConfigurationError("SSE schedule needs k >= 1")
        if self.kind is ScheduleKind.CONSTRAINED:
            if self.k < 1 or self.m < 1:
                raise ConfigurationError("constrained schedule needs k, m >= 1")
            _check_delta(self.delta)
            if self.m * self.k * math.log(self.T) / self.delta <= 1.0:
                raise ConfigurationError("constrained schedule log argument must exceed 1")


def block_eps(schedule: PrecisionSchedule, i: float) -> float:
    """Precision for block ``i`` (``i`` may be fractional; ``2**i`` is the block length)."""
    if i < 0:
        raise ConfigurationError(f"block index must be >= 0, got {i}")
    inv_len = 2.0 ** (-i)
    log_T = math.log(schedule.T)
    if schedule.kind is ScheduleKind.DELAYED:
        return 2.0 * math.sqrt(log_T * inv_len)
    if schedule.kind is ScheduleKind.SSE:
        return math.sqrt(10.0 * schedule.k * log_T ** 3 * inv_len)
    if schedule.kind is ScheduleKind.CONSTRAINED:
        return math.sqrt(6.0 * inv_len * math.log(schedule.m * schedule.k * log_T / schedule.delta))
    raise ConfigurationError(f"unknown schedule kind {schedule.kind!r}")


def without_replacement_deviations(population, s: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``|sample mean - population mean|`` for ``trials`` uniform size-``s`` subsets."""
    population = np.asarray(population, dtype=float)
    T = len(population)
    if not 1 <= s <= T:
        raise ConfigurationError(f"need 1 <= s <= T, got s={s}, T={T}")
    mu = population.mean()
    out = np.empty(trials)
    for r in range(trials):
        idx = rng.choice(T, size=s, replace=False)
        out[r] = abs(population[idx].mean() - mu)
    return out


def exceedance_rate(population, s: int, delta: float, trials: int, rng: np.random.Generator,
                    bound: str = "hoeffding") -> float:
    """Fraction of without-replacement resamples whose deviation exceeds the bound."""
    if bound == "hoeffding":
        eps = hoeffding_wor_eps(s, delta)
    elif bound == "serfling":
        eps = serfling_eps(s, len(population), delta)
    else:
        raise ConfigurationError(f"unknown bound {bound!r}")
    dev = without_replacement_deviations(population, s, trials, rng)
    return float(np.mean(dev > eps))
