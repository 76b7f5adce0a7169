"""Random-order online binary classification over finite hypothesis classes.

Every quantity the analysis talks about (empirical prefix losses, the
supremum deviation over the class) is computed exactly by scanning the
class, so the VC-dimension bounds can be checked directly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .core import ConfigurationError, LossInstance, Permutation, ValidationError, make_rng, STREAM_AUX
from .regret import RegretReport, evaluate_regret


@dataclass(frozen=True)
class LabeledDataset:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.ndim != 1 or y.shape != x.shape or len(x) < 1:
            raise ValidationError("dataset needs matching non-empty 1-D x and y")
        if not np.all((y == 0) | (y == 1)):
            raise ValidationError("labels must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(int))

    @property
    def T(self) -> int:
        return len(self.x)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            for xi, yi in zip(self.x, self.y):
                writer.writerow([repr(float(xi)), int(yi)])

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "LabeledDataset":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            if next(reader) != ["x", "y"]:
                raise ValidationError("dataset header must be 'x,y'")
            rows = [(float(a), int(b)) for a, b in reader]
        x, y = zip(*rows)
        return cls(np.array(x), np.array(y))


class FiniteHypothesisClass:
    """A finite list of predictors ``x -> {0, 1}`` with a declared VC dimension."""

    def __init__(self, hypotheses: Sequence[Callable], vc_dim: int):
        if len(hypotheses) == 0:
            raise ValidationError("hypothesis class must be non-empty")
        if vc_dim < 1:
            raise ValidationError("VC dimension must be a positive integer")
        self.hypotheses = list(hypotheses)
        self.vc_dim = int(vc_dim)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def predict(self, x) -> np.ndarray:
        """``len(x) x |H|`` matrix of predicted labels."""
        x = np.asarray(x, dtype=float)
        return np.column_stack([np.asarray(h(x), dtype=int) for h in self.hypotheses])


class ThresholdClass(FiniteHypothesisClass):
    """``h_j(x) = 1{x >= theta_j}`` for ``theta_j = j / grid``, ``j = 0..grid-1``."""

    def __init__(self, grid: int):
        if grid < 1:
            raise ValidationError("grid size must be positive")
        self.thresholds = np.arange(grid) / grid
        super().__init__([lambda x, th=th: (x >= th).astype(int) for th in self.thresholds], vc_dim=1)

    def predict(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float)[:, None] >= self.thresholds[None, :]).astype(int)


def loss_matrix(hclass: FiniteHypothesisClass, data: LabeledDataset) -> np.ndarray:
    """0-1 loss of every hypothesis on every example, ``T x |H|``."""
    return (hclass.predict(data.x) != data.y[:, None]).astype(float)


def erm_choose(hclass: FiniteHypothesisClass, data: LabeledDataset, prefix: Sequence[int] = ()) -> int:
    """Index of the hypothesis with fewest mistakes on ``prefix`` (lowest index on ties)."""
    prefix = np.asarray(prefix, dtype=int)
    if len(prefix) == 0:
        return 0
    sub = LabeledDataset(data.x[prefix], data.y[prefix])
    return int(np.argmin(loss_matrix(hclass, sub).sum(axis=0)))


def deviation_eps(dvc: int, t_prev: int, delta: float) -> float:
    """Uniform deviation bound for the first ``t_prev`` examples of a random order."""
    if dvc < 1:
        raise ConfigurationError("VC dimension must be >= 1")
    if t_prev < 1:
        raise ConfigurationError("need at least one previous example")
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must lie in (0, 1)")
    first = math.sqrt(8.0 * dvc / t_prev * math.log(2.0 * math.e * t_prev / dvc))
    second = math.sqrt(8.0 / t_prev * math.log(2.0 / delta))
    return 0.5 * (first + second)


def sup_deviation(losses: np.ndarray, idx) -> float:
    """``max_h |mean loss on the whole set - mean loss on idx|``."""
    return float(np.max(np.abs(losses.mean(axis=0) - losses[idx].mean(axis=0))))


def run_random_order_erm(hclass: FiniteHypothesisClass, data: LabeledDataset, seed: int) -> RegretReport:
    """Stream ``data`` in random order, predicting with the prefix ERM every round.

    ``diagnostics["sup_deviation"][t-1]`` is the supremum deviation between
    the full-data loss and the empirical loss on the first ``t-1`` examples
    (NaN at ``t = 1``).
    """
    L = loss_matrix(hclass, data)
    T = data.T
    order = Permutation.draw(T, seed).order
    Lp = L[order]
    prefix = np.zeros_like(Lp)
    if T > 1:
        np.cumsum(Lp[:-1], axis=0, out=prefix[1:])
    chosen = np.argmin(prefix, axis=1)
    incurred = Lp[np.arange(T), chosen]
    with np.errstate(invalid="ignore", divide="ignore"):
        emp = prefix / np.arange(T)[:, None]
    sup_dev = np.max(np.abs(emp - L.mean(axis=0)), axis=1)
    sup_dev[0] = np.nan
    report = evaluate_regret(incurred, LossInstance(L), "full", order=order, seed=seed,
                             diagnostics={"sup_deviation": sup_dev, "chosen": chosen})
    return report


def deviation_exceedance(hclass: FiniteHypothesisClass, data: LabeledDataset, t_prev: int,
                         delta: float, trials: int, seed: int) -> float:
    """Fraction of random orders whose first ``t_prev`` examples deviate beyond the bound."""
    L = loss_matrix(hclass, data)
    if not 1 <= t_prev <= data.T:
        raise ConfigurationError("t_prev must lie in [1, T]")
    eps = deviation_eps(hclass.vc_dim, t_prev, delta)
    rng = make_rng(seed, STREAM_AUX)
    full = L.mean(axis=0)
    hits = 0
    for _ in range(trials):
        idx = rng.choice(data.T, size=t_prev, replace=False)
        if np.max(np.abs(full - L[idx].mean(axis=0))) > eps:
            hits += 1
    return hits / trials


def regret_bound(dvc: int, T: int) -> float:
    return 8.0 * math.sqrt(dvc * T * math.log(T / dvc))
