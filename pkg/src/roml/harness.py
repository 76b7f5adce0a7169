"""Instance generators, algorithm registry, Monte-Carlo trials and CSV output."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Union

import numpy as np

from .classification import LabeledDataset, ThresholdClass, run_random_order_erm
from .constrained import ConstrainedInstance, run_sim_constrained
from .core import (ConfigurationError, Full, LossInstance, RomlError, make_rng, make_stream,
                   STREAM_INSTANCE)
from .experts import run_birthday_test, run_ftl
from .regret import RegretReport, evaluate_regret
from .sim_delayed import run_sim_delayed
from .switching import run_sse

__all__ = [
    "InstanceSpec", "generate_instance", "GENERATORS", "ALGORITHMS", "run_trials", "TrialAggregate",
    "TrialError", "RegretReport", "evaluate_regret", "write_results_csv", "write_trajectory_csv",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = ("seed", "T", "k", "regret", "switches", "violation_max", "stop_time")


@dataclass(frozen=True)
class InstanceSpec:
    """Generator name plus its parameters. ``seed`` fixes the instance, not the order."""

    generator: str
    T: int
    k: int = 2
    m: int = 1
    rho: float = 0.25
    gap: float = 0.3
    noise: float = 0.1
    seed: int = 0
    grid: int = 64
    best: int = 0

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ConfigurationError(f"unknown generator {self.generator!r}; known: {sorted(GENERATORS)}")
        if self.T < 1:
            raise ConfigurationError("T must be positive")


def birthday_adversarial(spec: InstanceSpec) -> LossInstance:
    """Action 0 sees every grid value ``i/T`` exactly once; action 1 always loses 0."""
    T = spec.T
    grid = np.arange(1, T + 1) / T
    col = make_rng(spec.seed, STREAM_INSTANCE).permutation(grid)
    return LossInstance(np.column_stack([col, np.zeros(T)]))


def iid_uniform_support(spec: InstanceSpec) -> LossInstance:
    """Action 0 draws i.i.d. uniform grid values ``i/T``; action 1 always loses 0."""
    T = spec.T
    col = make_rng(spec.seed, STREAM_INSTANCE).integers(1, T + 1, size=T) / T
    return LossInstance(np.column_stack([col, np.zeros(T)]))


def gap_bandit(spec: InstanceSpec) -> LossInstance:
    """0/1 losses with exact column means: ``(1-gap)/2`` for action ``best``, ``+gap`` for the rest.

    Each column holds exactly ``round(mean * T)`` ones at random rows.
    """
    T, k, gap = spec.T, spec.k, spec.gap
    if not 0.0 <= gap <= 1.0:
        raise ConfigurationError("gap must lie in [0, 1]")
    if not 0 <= spec.best < k:
        raise ConfigurationError("best action index out of range")
    rng = make_rng(spec.seed, STREAM_INSTANCE)
    low = (1.0 - gap) / 2.0
    losses = np.zeros((T, k))
    for a in range(k):
        mean = low if a == spec.best else low + gap
        ones = int(round(mean * T))
        losses[rng.permutation(T)[:ones], a] = 1.0
    return LossInstance(losses)


def constrained_random(spec: InstanceSpec) -> ConstrainedInstance:
    """Bernoulli rewards and costs around per-action means drawn once, then frozen.

    Action 0 is the null action (no reward, no cost); budget ``B = rho * T``.
    """
    T, k, m = spec.T, spec.k, spec.m
    if k < 2:
        raise ConfigurationError("constrained instances need the null action plus at least one more")
    rng = make_rng(spec.seed, STREAM_INSTANCE)
    reward_means = np.concatenate([[0.0], rng.uniform(0.2, 1.0, size=k - 1)])
    cost_means = np.concatenate([np.zeros((m, 1)), rng.uniform(0.0, 1.0, size=(m, k - 1))], axis=1)
    rewards = (rng.random((T, k)) < reward_means).astype(float)
    costs = (rng.random((m, T, k)) < cost_means[:, None, :]).astype(float)
    return ConstrainedInstance(rewards=rewards, costs=costs, budget=spec.rho * T, null_action=0)


def threshold_labels(spec: InstanceSpec) -> LabeledDataset:
    """Uniform ``x`` in [0, 1), ``y = 1{x >= theta*}`` flipped with probability ``noise``.

    ``theta*`` is the middle grid threshold.
    """
    if not 0.0 <= spec.noise <= 1.0:
        raise ConfigurationError("noise must lie in [0, 1]")
    rng = make_rng(spec.seed, STREAM_INSTANCE)
    x = rng.random(spec.T)
    theta = (spec.grid // 2) / spec.grid
    flips = rng.random(spec.T) < spec.noise
    y = (x >= theta).astype(int) ^ flips.astype(int)
    return LabeledDataset(x, y)


GENERATORS: dict[str, Callable] = {
    "birthday_adversarial": birthday_adversarial,
    "iid_uniform_support": iid_uniform_support,
    "gap_bandit": gap_bandit,
    "constrained_random": constrained_random,
    "threshold_labels": threshold_labels,
}


def generate_instance(spec: InstanceSpec):
    return GENERATORS[spec.generator](spec)


def _birthday(instance, seed, spec, opts):
    stream = make_stream(instance, seed, Full())
    incurred, actions, tau = run_birthday_test(stream)
    return evaluate_regret(incurred, instance, "full", order=stream.permutation.order, actions=actions,
                           stop_time=tau, seed=seed)


def _ftl(instance, seed, spec, opts):
    stream = make_stream(instance, seed, Full())
    incurred, actions = run_ftl(stream)
    return evaluate_regret(incurred, instance, "full", order=stream.permutation.order, actions=actions,
                           seed=seed)


def _sim_ftl(instance, seed, spec, opts):
    return run_sim_delayed(instance, int(opts.get("d", 0)), seed,
                           check_unbiased=bool(opts.get("check_unbiased", False)))


def _sim_constrained(instance, seed, spec, opts):
    return run_sim_constrained(instance, float(opts.get("delta", 0.1)), seed)


def _sse(instance, seed, spec, opts):
    return run_sse(instance, seed)


def _erm(instance, seed, spec, opts):
    return run_random_order_erm(ThresholdClass(spec.grid), instance, seed)


ALGORITHMS: dict[str, Callable] = {
    "birthday": _birthday,
    "ftl": _ftl,
    "sim_ftl": _sim_ftl,
    "sim_constrained": _sim_constrained,
    "sse": _sse,
    "erm": _erm,
}


class TrialError(RomlError):
    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"trial with seed {seed} failed: {cause!r}")
        self.seed = seed
        self.cause = cause


@dataclass
class TrialAggregate:
    algorithm: str
    spec: InstanceSpec
    seeds: list
    reports: list
    mean: float
    std: float
    min: float
    max: float

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.regret for r in self.reports])

    @property
    def count(self) -> int:
        return len(self.reports)


def _one_trial(algorithm: str, spec: InstanceSpec, instance, seed: int, opts: dict) -> RegretReport:
    try:
        return ALGORITHMS[algorithm](instance, seed, spec, opts)
    except Exception as exc:  # re-raised with the seed attached
        raise TrialError(seed, exc) from exc


def run_trials(algorithm: str, spec: InstanceSpec, seeds: Iterable[int], options: dict | None = None,
               jobs: int = 1, instance=None) -> TrialAggregate:
    """Run one independent trial per seed on a single instance and aggregate the regrets.

    The instance comes from ``spec`` (its own seed); trial seeds only drive
    the arrival order and the learner's internal randomness. Results are
    merged in seed-list order whatever the completion order.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; known: {sorted(ALGORITHMS)}")
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigurationError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigurationError("trial seeds must be distinct")
    opts = dict(options or {})
    instance = generate_instance(spec) if instance is None else instance
    if jobs > 1 and len(seeds) > 1:
        from joblib import Parallel, delayed

        reports = Parallel(n_jobs=jobs)(delayed(_one_trial)(algorithm, spec, instance, s, opts) for s in seeds)
    else:
        reports = [_one_trial(algorithm, spec, instance, s, opts) for s in seeds]
    regrets = [r.regret for r in reports]
    mean = math.fsum(regrets) / len(regrets)
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in regrets) / (len(regrets) - 1)) if len(regrets) > 1 else 0.0
    return TrialAggregate(algorithm=algorithm, spec=spec, seeds=seeds, reports=list(reports), mean=mean,
                          std=std, min=min(regrets), max=max(regrets))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(int(value))


def result_rows(reports: Iterable[RegretReport]) -> list[list[str]]:
    return [[_fmt(r.seed), _fmt(r.T), _fmt(r.k), _fmt(r.regret), _fmt(r.switch_count),
             _fmt(r.violation_max), _fmt(r.stop_time)] for r in reports]


def results_csv_text(reports: Iterable[RegretReport], header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(RESULT_COLUMNS)
    writer.writerows(result_rows(reports))
    return buf.getvalue()


def write_results_csv(path: Union[str, Path], reports: Iterable[RegretReport]) -> None:
    Path(path).write_text(results_csv_text(reports))


def write_trajectory_csv(directory: Union[str, Path], report: RegretReport, prefix: str = "") -> Path:
    path = Path(directory) / f"{prefix}trajectory_{report.seed}.csv"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "cum_regret"])
    writer.writerows([t, repr(float(v))] for t, v in enumerate(report.trajectory, start=1))
    path.write_text(buf.getvalue())
    return path


def spec_dict(spec: InstanceSpec) -> dict:
    return asdict(spec)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0):
        raise ValueError("log-log slope needs positive values")
    return float(np.polyfit(xs, np.log(ys), 1)[0])
