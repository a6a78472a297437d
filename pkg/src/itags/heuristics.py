"""Search heuristics: trait-mismatch error (APR), normalized schedule
quality (NSQ), and their convex combination (TETAQ)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Tolerance on the clipped-mismatch numerator when testing apr == 0;
# trait arithmetic accumulates rounding.
APR_EPSILON = 1e-9


@dataclass(frozen=True)
class TraitMismatch:
    matrix: np.ndarray  # Y - A.Q, per task and trait
    clipped_error: float  # sum of positive entries
    denominator: float  # sum of all requirement entries


def _entries(allocation) -> np.ndarray:
    arr = getattr(allocation, "entries", allocation)
    return np.asarray(arr, dtype=float)


def trait_mismatch(allocation, robot_traits, desired_traits) -> TraitMismatch:
    a = _entries(allocation)
    q = np.asarray(robot_traits, dtype=float)
    y = np.asarray(desired_traits, dtype=float)
    if a.shape != (y.shape[0], q.shape[0]) or q.shape[1] != y.shape[1]:
        raise ValueError(
            f"dimension mismatch: allocation {a.shape}, robot traits {q.shape}, "
            f"desired traits {y.shape}"
        )
    denominator = float(y.sum())
    if denominator <= 0:
        raise ValueError("desired trait matrix must have a positive entry")
    mismatch = y - a @ q
    clipped = float(np.clip(mismatch, 0.0, None).sum())
    return TraitMismatch(matrix=mismatch, clipped_error=clipped, denominator=denominator)


def apr(allocation, robot_traits, desired_traits) -> float:
    """Fraction of the total required trait mass left unmet by the allocation.

    0 iff every task's requirements are met or exceeded element-wise;
    1 for the empty allocation.
    """
    tm = trait_mismatch(allocation, robot_traits, desired_traits)
    return tm.clipped_error / tm.denominator


def nsq(makespan_bar: float, makespan_best: float, makespan_worst: float) -> float:
    """Makespan normalized between the unconstrained best schedule and the
    totally-ordered worst-case over-estimate. +inf marks an infeasible
    schedule and propagates."""
    if math.isinf(makespan_bar):
        return math.inf
    if makespan_bar < makespan_best - 1e-9:
        raise ValueError(
            f"schedule makespan {makespan_bar} below unconstrained bound {makespan_best}"
        )
    spread = makespan_worst - makespan_best
    if spread <= 0:
        # Degenerate normalization: every finite schedule counts as best.
        return 0.0
    return (makespan_bar - makespan_best) / spread


def tetaq(apr_value: float, nsq_value: float, alpha: float) -> float:
    """Convex combination alpha * apr + (1 - alpha) * nsq; +inf propagates."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if math.isinf(nsq_value):
        return math.inf
    return alpha * apr_value + (1.0 - alpha) * nsq_value


@dataclass(frozen=True)
class HeuristicValues:
    apr: float
    nsq: float
    tetaq: float
    alpha: float

    @classmethod
    def compute(cls, apr_value: float, nsq_value: float, alpha: float) -> "HeuristicValues":
        return cls(
            apr=apr_value,
            nsq=nsq_value,
            tetaq=tetaq(apr_value, nsq_value, alpha),
            alpha=alpha,
        )
