"""Delayed-feedback control loop: detection, strategy selection, queue updates.

Per slot t the loop draws the state from the schedule, detects the active
member from the delayed sample window (or picks uniformly during warmup),
selects the strategy minimizing V*r_0 + sum_k Q_k r_k under the detected
member, realizes the costs, and updates the virtual queues with the
D-delayed penalties.

A single run is strictly sequential; ensemble runs are independent with
per-run RNG streams derived from (master seed, run index), so results do not
depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

from .distributions import CoveringSet, Schedule, nearest_member
from .errors import ConfigurationError, DimensionError
from .strategies import StrategySpace


@dataclass(frozen=True)
class SimConfig:
    space: StrategySpace
    schedule: Schedule
    covering: CoveringSet
    V: float
    D: int
    window: int | Callable[[int], int]
    horizon: int
    seed: int

    def w_at(self, t: int) -> int:
        return self.window if isinstance(self.window, int) else int(self.window(t))

    def validate(self) -> None:
        problems = []
        if self.V < 0:
            problems.append(f"V must be >= 0, got {self.V}")
        if self.D < 0:
            problems.append(f"delay D must be >= 0, got {self.D}")
        if self.horizon < 1:
            problems.append(f"horizon must be >= 1, got {self.horizon}")
        n = self.space.states.total
        if len(self.schedule.limit) != n:
            problems.append("schedule limit length does not match the state space")
        if self.covering.n_outcomes != n:
            problems.append("covering members do not match the state space")
        for t in range(min(self.horizon, 4096)):
            if self.w_at(t) < 1:
                problems.append(f"window size at t={t} is {self.w_at(t)} (< 1)")
                break
        if problems:
            raise ConfigurationError("; ".join(problems))

    @cached_property
    def istar(self) -> int:
        idx, _ = nearest_member(self.covering, self.schedule.limit, warn=False)
        return idx

    def warmup_mask(self) -> np.ndarray:
        t = np.arange(self.horizon)
        w = np.array([self.w_at(int(s)) for s in t])
        return t <= self.D + w - 1


@dataclass(frozen=True)
class TraceRecord:
    """One slot of a run: state, detection, choice, costs, queue after update."""

    t: int
    omega: int
    jstar: int
    warmup: bool
    m: int
    p: np.ndarray  # realized (p_0 ... p_K)
    q: np.ndarray  # queue vector after the slot-t update
    avg: np.ndarray  # running averages (1/(t+1)) sum p


@dataclass
class RunTrace:
    omega: np.ndarray  # (T,)
    jstar: np.ndarray  # (T,) member index used (warmup slots hold the random pick)
    warmup: np.ndarray  # (T,) bool
    m: np.ndarray  # (T,)
    p: np.ndarray  # (T, K+1)
    q: np.ndarray  # (T, K) queues after each slot's update
    avg: np.ndarray  # (T, K+1)

    @property
    def horizon(self) -> int:
        return self.omega.size

    def record(self, t: int) -> TraceRecord:
        return TraceRecord(
            t=t,
            omega=int(self.omega[t]),
            jstar=int(self.jstar[t]),
            warmup=bool(self.warmup[t]),
            m=int(self.m[t]),
            p=self.p[t],
            q=self.q[t],
            avg=self.avg[t],
        )

    def records(self) -> Iterator[TraceRecord]:
        return (self.record(t) for t in range(self.horizon))


@dataclass
class EnsembleResult:
    mean_p: np.ndarray  # (T, K+1) per-slot means across runs
    final_avg: np.ndarray  # (n, K+1) per-run final time averages
    run_count: int
    istar: int
    warmup: np.ndarray  # (T,) bool
    p: np.ndarray | None = None  # (n, T, K+1) per-run realized costs
    jstar: np.ndarray | None = None  # (n, T)
    m: np.ndarray | None = None  # (n, T)
    q: np.ndarray | None = None  # (n, T, K) queues after each slot's update

    @property
    def errors(self) -> np.ndarray:
        """(n, T) bool: slots whose used member differs from the limit's."""
        if self.jstar is None:
            raise ValueError("per-run arrays were not retained")
        return self.jstar != self.istar


def update_queues(q: np.ndarray, p_delayed: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Q <- max(Q + p(t-D) - c, 0), componentwise."""
    q = np.asarray(q, dtype=np.float64)
    p_delayed = np.asarray(p_delayed, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if not (q.shape == p_delayed.shape == c.shape):
        raise DimensionError("queue, penalty, and constraint shapes differ")
    return np.maximum(q + p_delayed - c, 0.0)


def lyapunov_drift(q_before: np.ndarray, q_after: np.ndarray) -> tuple[float, float, float]:
    """(L_before, L_after, drift) with L = ||Q||^2 / 2."""
    lb = 0.5 * float(np.dot(q_before, q_before))
    la = 0.5 * float(np.dot(q_after, q_after))
    return lb, la, la - lb


def select_strategy(q: np.ndarray, V: float, r_table: np.ndarray) -> int:
    """argmin_m V r_0^(m) + sum_k Q_k r_k^(m); ties go to the lowest index.

    Scores accumulate with elementwise ops in fixed k order so a scalar
    rescan reproduces them bit for bit.
    """
    scores = V * r_table[0]
    for k in range(r_table.shape[0] - 1):
        scores = scores + r_table[k + 1] * q[k]
    return int(np.argmin(scores))


def detect(window: Sequence[int], covering: CoveringSet) -> int:
    """Most likely member for the delayed window; ties go to the lowest index.

    Members with zero mass on an observed outcome score -inf and rank last.
    """
    w = np.asarray(window, dtype=np.int64)
    ll = covering.log_matrix[:, w].sum(axis=1)
    return int(np.argmax(ll))


def warmup_detect(covering: CoveringSet, rng: np.random.Generator) -> int:
    """Uniform random member pick for slots whose window is incomplete."""
    return int(rng.integers(covering.size))


def run_rngs(master_seed: int, run_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Declared splitting rule: per-run child streams for states and warmup picks."""
    ss = np.random.SeedSequence((master_seed, run_index))
    s_states, s_warm = ss.spawn(2)
    return np.random.default_rng(s_states), np.random.default_rng(s_warm)


class _Shared:
    """Per-ensemble precomputation shared read-only across runs."""

    def __init__(self, config: SimConfig):
        config.validate()
        self.config = config
        T = config.horizon
        weights = config.schedule.weights_matrix(T)
        self.cdf = np.cumsum(weights, axis=1)
        self.logp = config.covering.log_matrix
        self.r_tables = np.stack(
            [config.space.r_table(m) for m in config.covering.members]
        )
        self.warmup = config.warmup_mask()
        self.istar = config.istar


def _draw_states(shared: _Shared, rng: np.random.Generator) -> np.ndarray:
    T, n = shared.cdf.shape
    u = rng.random(T)
    idx = (shared.cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, n - 1).astype(np.int32)


def run(config: SimConfig, run_index: int = 0, _shared: _Shared | None = None) -> RunTrace:
    """Execute one seeded run and return its full trace."""
    shared = _shared if _shared is not None else _Shared(config)
    space = config.space
    K = space.cost.n_penalties
    T, D, V = config.horizon, config.D, config.V
    c = space.cost.c
    realized = space.realized
    logp = shared.logp
    r_tables = shared.r_tables
    warm = shared.warmup

    rng_states, rng_warm = run_rngs(config.seed, run_index)
    omega = _draw_states(shared, rng_states)

    jstar = np.empty(T, dtype=np.int32)
    ms = np.empty(T, dtype=np.int32)
    p = np.empty((T, K + 1))
    qlog = np.empty((T, K))
    q = np.zeros(K)
    for t in range(T):
        if warm[t]:
            j = int(rng_warm.integers(logp.shape[0]))
        else:
            w = config.w_at(t)
            ll = logp[:, omega[t - D - w + 1 : t - D + 1]].sum(axis=1)
            j = int(np.argmax(ll))
        rt = r_tables[j]
        scores = V * rt[0]
        for k in range(K):
            scores = scores + rt[k + 1] * q[k]
        m = int(np.argmin(scores))
        p[t] = realized[:, m, omega[t]]
        delayed = p[t - D, 1:] if t - D >= 0 else np.zeros(K)
        q = np.maximum(q + delayed - c, 0.0)
        qlog[t] = q
        jstar[t] = j
        ms[t] = m
    avg = np.cumsum(p, axis=0) / np.arange(1, T + 1)[:, None]
    return RunTrace(
        omega=omega,
        jstar=jstar,
        warmup=warm.copy(),
        m=ms,
        p=p,
        q=qlog,
        avg=avg,
    )


def run_ensemble(
    config: SimConfig,
    n_runs: int,
    on_trace: Callable[[int, RunTrace], None] | None = None,
    store_runs: bool = True,
) -> EnsembleResult:
    """Independent seeded runs merged by run index.

    ``on_trace`` is invoked with each completed run (for streaming output);
    ``store_runs=False`` drops the per-run arrays that only the estimators
    need, bounding memory for large ensembles.
    """
    if n_runs < 1:
        raise ConfigurationError(f"n_runs must be >= 1, got {n_runs}")
    shared = _Shared(config)
    T = config.horizon
    K = config.space.cost.n_penalties
    sum_p = np.zeros((T, K + 1))
    final = np.empty((n_runs, K + 1))
    p_runs = np.empty((n_runs, T, K + 1)) if store_runs else None
    j_runs = np.empty((n_runs, T), dtype=np.int32) if store_runs else None
    m_runs = np.empty((n_runs, T), dtype=np.int32) if store_runs else None
    q_runs = np.empty((n_runs, T, K)) if store_runs else None
    for i in range(n_runs):
        tr = run(config, run_index=i, _shared=shared)
        sum_p += tr.p
        final[i] = tr.avg[-1]
        if store_runs:
            p_runs[i] = tr.p
            j_runs[i] = tr.jstar
            m_runs[i] = tr.m
            q_runs[i] = tr.q
        if on_trace is not None:
            on_trace(i, tr)
    return EnsembleResult(
        mean_p=sum_p / n_runs,
        final_avg=final,
        run_count=n_runs,
        istar=shared.istar,
        warmup=shared.warmup,
        p=p_runs,
        jstar=j_runs,
        m=m_runs,
        q=q_runs,
    )
