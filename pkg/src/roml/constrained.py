"""Online learning with long-term resource constraints in random order.

The benchmark is the LP ``max <r_bar, x>`` over the simplex subject to
``<c_bar_j, x> <= rho`` for every resource. The learner is the Simulation
template around a primal-dual routine (multiplicative weights on the
Lagrangian, projected gradient ascent on the multipliers) trained with a
shrunken per-round budget ``rho - 2 eps_i``. Blocks whose shrunken budget
falls below ``rho / 2`` are forfeited by playing the null action, and a
hard guard switches to the null action for good before any real round
could overdraw the budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .concentration import PrecisionSchedule, ScheduleKind, block_eps, num_blocks
from .core import (ConfigurationError, Permutation, ValidationError, make_rng, validate_mixture,
                   STREAM_TRAINING)
from .regret import RegretReport, evaluate_regret
from .simplex import simplex_max

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class ConstrainedInstance:
    """Multiset of ``T`` tuples ``(r_t, c_1t, ..., c_mt)`` plus a budget ``B``.

    ``rewards`` is ``T x k``; ``costs`` is ``m x T x k``. Action
    ``null_action`` must cost exactly zero on every resource and round.
    """

    rewards: np.ndarray
    costs: np.ndarray
    budget: float
    null_action: int = 0

    def __post_init__(self):
        rewards = np.array(self.rewards, dtype=float)
        costs = np.array(self.costs, dtype=float)
        if rewards.ndim != 2 or costs.ndim != 3 or costs.shape[1:] != rewards.shape:
            raise ValidationError(f"shape mismatch: rewards {rewards.shape}, costs {costs.shape}")
        if costs.shape[0] < 1 or rewards.shape[0] < 1:
            raise ValidationError("need at least one round and one resource")
        for name, arr in (("rewards", rewards), ("costs", costs)):
            if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if not 0 <= self.null_action < rewards.shape[1]:
            raise ValidationError("null action index out of range")
        if np.any(costs[:, :, self.null_action] != 0.0):
            raise ValidationError("the null action must have zero cost everywhere")
        rho = self.budget / rewards.shape[0]
        if not 0.0 < rho <= 1.0:
            raise ValidationError(f"per-round budget rho = B/T must lie in (0, 1], got {rho}")
        rewards.setflags(write=False)
        costs.setflags(write=False)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def T(self) -> int:
        return self.rewards.shape[0]

    @property
    def k(self) -> int:
        return self.rewards.shape[1]

    @property
    def m(self) -> int:
        return self.costs.shape[0]

    @property
    def rho(self) -> float:
        return self.budget / self.T

    def mean_rewards(self) -> np.ndarray:
        return self.rewards.mean(axis=0)

    def mean_costs(self) -> np.ndarray:
        return self.costs.mean(axis=1)

    def to_csv(self, path: Union[str, Path]) -> None:
        header = ["t"] + [f"r_{a + 1}" for a in range(self.k)]
        header += [f"c_{j + 1}_{a + 1}" for j in range(self.m) for a in range(self.k)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.T):
                row = list(self.rewards[t]) + list(self.costs[:, t, :].ravel())
                writer.writerow([t + 1] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: Union[str, Path], budget: float, null_action: int = 0) -> "ConstrainedInstance":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in line[1:]] for line in reader if line])
        k = sum(1 for h in header if h.startswith("r_"))
        m = (len(header) - 1 - k) // k if k else 0
        expected = ["t"] + [f"r_{a + 1}" for a in range(k)]
        expected += [f"c_{j + 1}_{a + 1}" for j in range(m) for a in range(k)]
        if k == 0 or header != expected:
            raise ValidationError(f"bad constrained-instance header: {header}")
        rewards = rows[:, :k]
        costs = rows[:, k:].reshape(len(rows), m, k).transpose(1, 0, 2)
        return cls(rewards=rewards, costs=costs, budget=budget, null_action=null_action)


@dataclass
class LpSolution:
    x: np.ndarray
    value: float
    slack: np.ndarray


def solve_opt_lp(mean_reward, mean_costs, rho: float) -> LpSolution:
    """Exact optimum of the benchmark LP via dense simplex with Bland's rule."""
    r = np.asarray(mean_reward, dtype=float)
    C = np.array(mean_costs, dtype=float, ndmin=2)
    k = r.shape[0]
    m = C.shape[0]
    if C.shape != (m, k):
        raise ValidationError(f"mean costs must be m x k, got {C.shape}")
    if rho <= 0:
        raise ValidationError("rho must be positive")
    # variables: x (k) then slacks (m); rows: costs then the simplex equality
    A = np.zeros((m + 1, k + m))
    A[:m, :k] = C
    A[:m, k:] = np.eye(m)
    A[m, :k] = 1.0
    b = np.concatenate([np.full(m, float(rho)), [1.0]])
    c = np.concatenate([r, np.zeros(m)])
    res = simplex_max(c, A, b)
    x = np.clip(res.x[:k], 0.0, None)
    x /= x.sum()
    slack = rho - C @ x
    if slack.min() < -FEASIBILITY_TOL:
        raise ValidationError(f"LP solution violates a constraint by {-slack.min()}")
    return LpSolution(x=x, value=float(r @ x), slack=slack)


@dataclass
class PrimalDualState:
    """Primal-dual learner for one simulated horizon of length ``horizon``.

    Primal: multiplicative weights over actions on ``r - sum_j lam_j c_j``.
    Dual: projected gradient ascent on ``lam`` in ``[0, 1/rho']``.
    """

    k: int
    m: int
    rho: float
    horizon: int
    null_action: int = 0
    log_weights: np.ndarray = None
    lam: np.ndarray = None
    spent: np.ndarray = None
    stopped: bool = False
    stop_round: int | None = None
    rounds: int = 0
    last_play: np.ndarray = None

    def __post_init__(self):
        if self.rho <= 0 or self.horizon < 1:
            raise ConfigurationError("primal-dual needs rho' > 0 and a positive horizon")
        self.log_weights = np.zeros(self.k) if self.log_weights is None else self.log_weights
        self.lam = np.zeros(self.m) if self.lam is None else self.lam
        self.spent = np.zeros(self.m) if self.spent is None else self.spent
        self.eta_primal = math.sqrt(math.log(self.k) / self.horizon)
        self.eta_dual = 1.0 / math.sqrt(self.horizon)
        self.lam_cap = 1.0 / self.rho

    @property
    def budget(self) -> float:
        return self.rho * self.horizon

    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()

    def play(self) -> np.ndarray:
        """Mixed action for the next simulated round (null action once stopped)."""
        if not self.stopped and np.any(self.spent + 1.0 > self.budget):
            self.stopped = True
            self.stop_round = self.rounds
        if self.stopped:
            x = np.zeros(self.k)
            x[self.null_action] = 1.0
        else:
            x = self.weights()
        self.last_play = x
        return x


def primal_dual_step(state: PrimalDualState, reward, costs) -> np.ndarray:
    """Account for the round just played with ``state.last_play``; return the next play."""
    if state.last_play is None:
        state.play()
    x = state.last_play
    reward = np.asarray(reward, dtype=float)
    costs = np.array(costs, dtype=float, ndmin=2)
    used = costs @ x
    state.spent += used
    state.rounds += 1
    if not state.stopped:
        state.log_weights += state.eta_primal * (reward - state.lam @ costs)
        state.lam = np.clip(state.lam + state.eta_dual * (used - state.rho), 0.0, state.lam_cap)
    return state.play()


def train_primal_dual(samples_r: np.ndarray, samples_c: np.ndarray, rho: float,
                      null_action: int = 0) -> tuple[np.ndarray, PrimalDualState]:
    """Run a fresh primal-dual learner over i.i.d. samples; return its mean play.

    ``samples_r`` is ``n x k`` and ``samples_c`` is ``n x m x k``.
    """
    n, k = samples_r.shape
    m = samples_c.shape[1]
    state = PrimalDualState(k=k, m=m, rho=rho, horizon=n, null_action=null_action)
    total = np.zeros(k)
    x = state.play()
    for s in range(n):
        total += x
        x = primal_dual_step(state, samples_r[s], samples_c[s])
    return total / n, state


@dataclass
class ConstrainedBlockLog:
    index: int
    start: int
    stop: int
    eps: float
    rho_i: float
    forfeited: bool
    x: np.ndarray
    past_reward: np.ndarray
    past_costs: np.ndarray
    next_reward: np.ndarray
    next_costs: np.ndarray
    opt_block: float | None = None
    train_stop: int | None = None


def run_sim_constrained(instance: ConstrainedInstance, delta: float, seed: int) -> RegretReport:
    """Simulation for online learning with long-term constraints on one random order."""
    if not 0.0 < delta < 1.0:
        raise ConfigurationError("delta must lie in (0, 1)")
    T, k, m = instance.T, instance.k, instance.m
    rho, B, null = instance.rho, instance.budget, instance.null_action
    order = Permutation.draw(T, seed).order
    rng = make_rng(seed, STREAM_TRAINING)
    rewards = instance.rewards[order]                    # T x k in play order
    costs = instance.costs[:, order, :].transpose(1, 0, 2)  # T x m x k in play order
    e_null = np.zeros(k)
    e_null[null] = 1.0

    played = np.zeros((T, k))
    played[:, null] = 1.0
    stop_time = None
    spent = np.zeros(m)
    interactions = 0
    blocks: list[ConstrainedBlockLog] = []

    def play_rounds(lo: int, hi: int, x: np.ndarray) -> None:
        # rounds lo..hi (1-based, inclusive) with the hard budget guard
        nonlocal stop_time, spent, interactions
        interactions += hi - lo + 1
        if stop_time is not None:
            return
        use = costs[lo - 1:hi] @ x                      # n x m
        before = spent + np.vstack([np.zeros(m), np.cumsum(use, axis=0)[:-1]])
        tripped = np.flatnonzero(np.any(before + 1.0 > B, axis=1))
        n_ok = tripped[0] if len(tripped) else hi - lo + 1
        played[lo - 1:lo - 1 + n_ok] = x
        spent = spent + use[:n_ok].sum(axis=0)
        if len(tripped):
            stop_time = lo - 1 + n_ok

    play_rounds(1, 1, e_null)
    schedule = PrecisionSchedule(ScheduleKind.CONSTRAINED, T, k=k, m=m, delta=delta) if T > 1 else None
    mean_r, mean_c = instance.mean_rewards(), instance.mean_costs()
    i = 0
    while 2**i + 1 <= T:
        lo, hi = 2**i + 1, min(2**(i + 1), T)
        eps = block_eps(schedule, i)
        rho_i = rho - 2.0 * eps
        past = slice(0, 2**i)
        past_r = rewards[past].mean(axis=0)
        past_c = costs[past].mean(axis=0)
        log = ConstrainedBlockLog(index=i, start=lo, stop=hi, eps=eps, rho_i=rho_i,
                                  forfeited=rho_i < rho / 2.0, x=e_null,
                                  past_reward=past_r, past_costs=past_c,
                                  next_reward=rewards[lo - 1:hi].mean(axis=0),
                                  next_costs=costs[lo - 1:hi].mean(axis=0))
        if not log.forfeited:
            draws = rng.integers(0, 2**i, size=2**i)
            x, state = train_primal_dual(rewards[draws], costs[draws], rho_i, null)
            log.x = validate_mixture(x, k)
            log.train_stop = state.stop_round
            log.opt_block = solve_opt_lp(past_r, past_c, rho_i).value
        play_rounds(lo, hi, log.x)
        blocks.append(log)
        i += 1

    if interactions != T:
        raise AssertionError(f"played {interactions} rounds, expected {T}")
    per_round_reward = np.einsum("tk,tk->t", rewards, played)
    consumption = np.einsum("tmk,tk->tm", costs, played)
    i_star = next((b.index for b in blocks if not b.forfeited), None)
    diagnostics = {
        "blocks": blocks,
        "i_star": i_star,
        "delta_prime": delta / (3.0 * max(num_blocks(T), 1)),
        "mean_reward": mean_r,
        "mean_costs": mean_c,
        "played": played,
    }
    return evaluate_regret(per_round_reward, instance, "constrained", order=order,
                           consumption=consumption, stop_time=stop_time, seed=seed,
                           diagnostics=diagnostics)


def clean_event_holds(block: ConstrainedBlockLog, mean_reward, mean_costs) -> bool:
    """Whether past and next block means are all within ``eps`` of the global means."""
    eps = block.eps
    return bool(
        np.max(np.abs(block.past_reward - mean_reward)) <= eps
        and np.max(np.abs(block.next_reward - mean_reward)) <= eps
        and np.max(np.abs(block.past_costs - mean_costs)) <= eps
        and np.max(np.abs(block.next_costs - mean_costs)) <= eps)
