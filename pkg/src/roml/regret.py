"""Regret bookkeeping shared by every algorithm and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import LossInstance, ValidationError

SETTINGS = ("full", "delayed", "bandit", "switching", "constrained")


@dataclass
class RegretReport:
    """Outcome of one trial.

    ``cumulative_loss`` is the learner's total loss, except in the
    constrained setting where it is the total reward collected up to the
    stopping time. ``trajectory[t-1]`` is the regret accumulated over the
    first ``t`` rounds; its last entry equals ``regret``.
    """

    cumulative_loss: float
    benchmark: float
    regret: float
    trajectory: np.ndarray
    T: int
    k: int
    seed: int | None = None
    switch_count: int | None = None
    violation_max: float | None = None
    stop_time: int | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)


def count_switches(actions) -> int:
    actions = np.asarray(actions)
    return int(np.count_nonzero(actions[1:] != actions[:-1]))


def evaluate_regret(incurred, instance, setting: str = "full", *, order=None, actions=None,
                    consumption=None, stop_time: int | None = None, seed: int | None = None,
                    diagnostics: dict | None = None) -> RegretReport:
    """Turn a per-round play log into a :class:`RegretReport`.

    ``order`` is the permutation that produced the rounds (row ``order[t]`` of
    the instance was played at round ``t+1``). The benchmark itself never
    depends on it. ``actions`` is required for the switching setting and
    ``consumption`` (``T x m`` per-round resource use) for the constrained one.
    """
    if setting not in SETTINGS:
        raise ValidationError(f"unknown setting {setting!r}")
    incurred = np.asarray(incurred, dtype=float)
    T = instance.T
    if incurred.shape != (T,):
        raise ValidationError(f"play log has {incurred.shape} entries, instance has T={T}")
    order = np.arange(T) if order is None else np.asarray(order)
    if order.shape != (T,):
        raise ValidationError("order length does not match the instance")
    diagnostics = {} if diagnostics is None else diagnostics

    if setting == "constrained":
        return _constrained_report(incurred, instance, order, consumption, stop_time, seed, diagnostics)

    if not isinstance(instance, LossInstance):
        raise ValidationError(f"setting {setting!r} needs a LossInstance")
    best = instance.best_action()
    benchmark = instance.benchmark()
    trajectory = np.cumsum(incurred) - np.cumsum(instance.losses[order, best])
    learner = float(incurred.sum())
    switches = None
    if setting == "switching":
        if actions is None:
            raise ValidationError("switching regret needs the action sequence")
        actions = np.asarray(actions)
        if actions.shape != (T,):
            raise ValidationError("action log length does not match the instance")
        # a switch between t and t+1 is charged at round t+1; a_{T+1} = a_T adds nothing
        switch_flags = np.concatenate([[0], (actions[1:] != actions[:-1]).astype(int)])
        trajectory = trajectory + np.cumsum(switch_flags)
        switches = int(switch_flags.sum())
        learner += switches
    elif actions is not None:
        switches = count_switches(actions)
    return RegretReport(cumulative_loss=learner, benchmark=benchmark, regret=learner - benchmark,
                        trajectory=trajectory, T=T, k=instance.k, seed=seed, switch_count=switches,
                        stop_time=stop_time, diagnostics=diagnostics)


def _constrained_report(rewards, instance, order, consumption, stop_time, seed, diagnostics):
    from .constrained import ConstrainedInstance, solve_opt_lp

    if not isinstance(instance, ConstrainedInstance):
        raise ValidationError("constrained setting needs a ConstrainedInstance")
    T = instance.T
    tau = T if stop_time is None else int(stop_time)
    if not 0 <= tau <= T:
        raise ValidationError(f"stop time {tau} outside [0, {T}]")
    lp = solve_opt_lp(instance.mean_rewards(), instance.mean_costs(), instance.rho)
    counted = np.where(np.arange(1, T + 1) <= tau, rewards, 0.0)
    collected = float(counted.sum())
    benchmark = T * lp.value
    trajectory = np.arange(1, T + 1) * lp.value - np.cumsum(counted)
    violation = None
    if consumption is not None:
        consumption = np.asarray(consumption, dtype=float)
        if consumption.shape != (T, instance.m):
            raise ValidationError(f"consumption must be T x m, got {consumption.shape}")
        overshoot = np.cumsum(consumption, axis=0) - instance.budget
        violation = float(max(0.0, overshoot.max()))
    return RegretReport(cumulative_loss=collected, benchmark=benchmark, regret=benchmark - collected,
                        trajectory=trajectory, T=T, k=instance.k, seed=seed, violation_max=violation,
                        stop_time=stop_time, diagnostics=diagnostics)
