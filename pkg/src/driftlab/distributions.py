"""Finite probability spaces, distances, covering sets, and state schedules.

Everything here is immutable after construction and safe to share read-only
across ensemble workers.  Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError

PROB_SUM_TOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability vector over an enumerated finite outcome space."""

    probs: np.ndarray

    def __post_init__(self):
        p = _freeze(np.asarray(self.probs, dtype=np.float64).ravel())
        object.__setattr__(self, "probs", p)
        if p.size == 0:
            raise ConfigurationError("distribution must have at least one outcome")
        if np.any(p < 0):
            raise ConfigurationError(f"negative probability entry: min={p.min()!r}")
        total = float(p.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ConfigurationError(
                f"probabilities sum to {total!r}, not 1 within {PROB_SUM_TOL}"
            )

    def __len__(self) -> int:
        return self.probs.size

    @cached_property
    def cdf(self) -> np.ndarray:
        return _freeze(np.cumsum(self.probs))

    @staticmethod
    def point_mass(n: int, outcome: int) -> "FiniteDistribution":
        p = np.zeros(n)
        p[outcome] = 1.0
        return FiniteDistribution(p)

    @staticmethod
    def uniform(n: int) -> "FiniteDistribution":
        return FiniteDistribution(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class ProductStateSpace:
    """Joint state space Ω = Ω_1 x ... x Ω_N with a fixed mixed-radix order.

    Joint outcome ids encode the tuple (w_1, ..., w_N) with the first user's
    component most significant.
    """

    per_user_cardinalities: tuple[int, ...]

    def __post_init__(self):
        cards = tuple(int(c) for c in self.per_user_cardinalities)
        object.__setattr__(self, "per_user_cardinalities", cards)
        if not cards or any(c < 1 for c in cards):
            raise ConfigurationError(f"invalid state cardinalities {cards}")

    @property
    def n_users(self) -> int:
        return len(self.per_user_cardinalities)

    @cached_property
    def total(self) -> int:
        return int(np.prod(self.per_user_cardinalities, dtype=object))

    @cached_property
    def _multipliers(self) -> tuple[int, ...]:
        # multiplier of component i; user 0 most significant
        mults = []
        m = 1
        for c in reversed(self.per_user_cardinalities):
            mults.append(m)
            m *= c
        return tuple(reversed(mults))

    def encode(self, components: Sequence[int]) -> int:
        if len(components) != self.n_users:
            raise DimensionError("component tuple length mismatch")
        out = 0
        for w, c, m in zip(components, self.per_user_cardinalities, self._multipliers):
            if not 0 <= w < c:
                raise DomainError(f"state component {w} out of range [0, {c})")
            out += w * m
        return out

    def decode(self, joint_id: int) -> tuple[int, ...]:
        if not 0 <= joint_id < self.total:
            raise DomainError(f"joint state id {joint_id} out of range")
        comps = []
        for c, m in zip(self.per_user_cardinalities, self._multipliers):
            comps.append((joint_id // m) % c)
        return tuple(comps)

    def component_arrays(self) -> list[np.ndarray]:
        """For each user i an array over joint ids giving that user's component."""
        ids = np.arange(self.total)
        return [
            (ids // m) % c
            for c, m in zip(self.per_user_cardinalities, self._multipliers)
        ]


@dataclass(frozen=True)
class CoveringSet:
    """Finite set of candidate distributions with support bounds.

    Every member's nonzero mass must lie strictly inside (beta_delta,
    alpha_delta) with 0 < beta_delta < alpha_delta.
    """

    members: tuple[FiniteDistribution, ...]
    delta: float
    alpha_delta: float
    beta_delta: float

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if len(members) < 1:
            raise ConfigurationError("covering set needs at least one member")
        n = len(members[0])
        if any(len(m) != n for m in members):
            raise DimensionError("covering members have mismatched lengths")
        if not (0 < self.beta_delta < self.alpha_delta):
            raise ConfigurationError(
                f"need 0 < beta_delta < alpha_delta, got "
                f"({self.beta_delta}, {self.alpha_delta})"
            )
        for j, m in enumerate(members):
            nz = m.probs[m.probs > 0]
            if nz.size and (nz.min() <= self.beta_delta or nz.max() >= self.alpha_delta):
                raise ConfigurationError(
                    f"member {j} has mass outside the open support band "
                    f"({self.beta_delta}, {self.alpha_delta})"
                )
        if self.delta <= 0:
            raise ConfigurationError(f"covering radius must be positive, got {self.delta}")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def n_outcomes(self) -> int:
        return len(self.members[0])

    @cached_property
    def prob_matrix(self) -> np.ndarray:
        """(M, |Ω|) matrix of member probabilities."""
        return _freeze(np.vstack([m.probs for m in self.members]))

    @cached_property
    def log_matrix(self) -> np.ndarray:
        """(M, |Ω|) matrix of log-probabilities, -inf where mass is zero."""
        p = self.prob_matrix
        with np.errstate(divide="ignore"):
            lg = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
        return _freeze(lg)

    @property
    def zeta(self) -> float:
        """Squared log-range of the support band, [log(alpha/beta)]^2."""
        return math.log(self.alpha_delta / self.beta_delta) ** 2


def l1_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    if len(p) != len(q):
        raise DimensionError(f"length mismatch: {len(p)} vs {len(q)}")
    return float(np.abs(p.probs - q.probs).sum())


def tv_distance(p: FiniteDistribution, q: FiniteDistribution) -> float:
    return 0.5 * l1_distance(p, q)


def metric_entropy(covering: CoveringSet) -> float:
    return math.log(covering.size)


def nearest_member(
    covering: CoveringSet, pi: FiniteDistribution, warn: bool = True
) -> tuple[int, float]:
    """Index of the L1-closest member and its distance; ties take the lowest index.

    Emits a warning when the distance is not below the declared covering
    radius (the set then fails to cover ``pi``).
    """
    if covering.n_outcomes != len(pi):
        raise DimensionError("distribution length does not match covering members")
    dists = np.abs(covering.prob_matrix - pi.probs).sum(axis=1)
    idx = int(np.argmin(dists))
    d = float(dists[idx])
    if warn and d >= covering.delta:
        import warnings

        warnings.warn(
            f"nearest member distance {d:.6g} >= covering radius {covering.delta:.6g}",
            stacklevel=2,
        )
    return idx, d


def sample(dist: FiniteDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over the stored outcome order; identical seed, identical draw."""
    u = rng.random()
    idx = int(np.searchsorted(dist.cdf, u, side="right"))
    return min(idx, len(dist) - 1)


def window_loglik(member: FiniteDistribution, window: Sequence[int]) -> float:
    """Average log-likelihood (1/w) sum log member(w_s) over the window.

    Returns -inf when the member puts zero mass on any observed outcome.
    """
    w = np.asarray(window, dtype=np.int64)
    if w.size == 0:
        raise DomainError("window must be nonempty")
    if w.min() < 0 or w.max() >= len(member):
        raise DomainError("window contains out-of-range outcome ids")
    p = member.probs[w]
    if np.any(p <= 0):
        return float("-inf")
    return float(np.log(p).mean())


def divergence(
    pi_tau: FiniteDistribution,
    p_j: FiniteDistribution,
    p_istar: FiniteDistribution,
) -> float:
    """Per-slot expectation E_pi[log(P_j / P_istar)].

    Equals -KL(P_istar || P_j) when pi_tau = P_istar; requires both members
    to carry mass wherever pi_tau does.
    """
    if not (len(pi_tau) == len(p_j) == len(p_istar)):
        raise DimensionError("distribution lengths differ")
    support = pi_tau.probs > 0
    if np.any(p_j.probs[support] <= 0) or np.any(p_istar.probs[support] <= 0):
        raise DomainError("zero member mass on a supported outcome")
    ratio = np.zeros(len(pi_tau))
    ratio[support] = np.log(p_j.probs[support]) - np.log(p_istar.probs[support])
    return float(np.dot(pi_tau.probs, ratio))


class Schedule:
    """Non-stationary state schedule: distribution of the joint state at slot t."""

    limit: FiniteDistribution

    def weights_at(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def at(self, t: int) -> FiniteDistribution:
        return FiniteDistribution(self.weights_at(t))

    def weights_matrix(self, horizon: int) -> np.ndarray:
        """(T, |Ω|) matrix of per-slot probability rows."""
        return np.vstack([self.weights_at(t) for t in range(horizon)])


@dataclass(frozen=True)
class GeometricSchedule(Schedule):
    """pi_t = (1 - rho^t) * limit + rho^t * start, rho in (0, 1)."""

    limit: FiniteDistribution
    start: FiniteDistribution
    rho: float

    def __post_init__(self):
        if len(self.limit) != len(self.start):
            raise DimensionError("limit and start lengths differ")
        if not 0 < self.rho < 1:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")

    def weights_at(self, t: int) -> np.ndarray:
        if t < 0:
            raise DomainError("slot index must be nonnegative")
        r = self.rho**t
        return (1.0 - r) * self.limit.probs + r * self.start.probs

    def weights_matrix(self, horizon: int) -> np.ndarray:
        r = self.rho ** np.arange(horizon)[:, None]
        return (1.0 - r) * self.limit.probs[None, :] + r * self.start.probs[None, :]


@dataclass(frozen=True)
class PiecewiseSchedule(Schedule):
    """Piecewise-constant schedule over segments [(start_slot, dist), ...].

    Segments must begin at slot 0 and have increasing start slots; the final
    segment's distribution must equal the declared limit so the schedule
    settles.
    """

    limit: FiniteDistribution
    segments: tuple[tuple[int, FiniteDistribution], ...]

    def __post_init__(self):
        segs = tuple((int(s), d) for s, d in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0][0] != 0:
            raise ConfigurationError("first segment must start at slot 0")
        starts = [s for s, _ in segs]
        if sorted(starts) != starts or len(set(starts)) != len(starts):
            raise ConfigurationError("segment start slots must be strictly increasing")
        if any(len(d) != len(self.limit) for _, d in segs):
            raise DimensionError("segment distribution lengths differ from limit")
        if l1_distance(segs[-1][1], self.limit) != 0.0:
            raise ConfigurationError("final segment must equal the limit distribution")

    def weights_at(self, t: int) -> np.ndarray:
        if t < 0:
            raise DomainError("slot index must be nonnegative")
        probs = self.segments[0][1].probs
        for start, dist in self.segments:
            if start > t:
                break
            probs = dist.probs
        return probs


def stationary(dist: FiniteDistribution) -> PiecewiseSchedule:
    return PiecewiseSchedule(limit=dist, segments=((0, dist),))
