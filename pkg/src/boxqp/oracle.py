"""Exact global solver for small instances by active-set enumeration.

Every local maximizer of a quadratic over the box is stationary on the
face defined by its active bounds, so enumerating all 3^n assignments
of variables to {at-zero, at-one, free} and solving the stationarity
system on the free block visits every candidate.  The best candidate is
the global maximum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import BoxQpInstance, feasible_value

MAX_ORACLE_N = 12

AT_ZERO, AT_ONE, FREE = 0, 1, 2

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class GlobalSolution:
    """Global optimum with the active pattern that produced it."""

    value: float
    x: np.ndarray
    pattern: tuple[int, ...]
    candidates_examined: int


def _stationary_points(Q: np.ndarray, q: np.ndarray, pattern) -> list[np.ndarray]:
    """Candidate x vectors for one active pattern.

    Free variables satisfy 2 Q_FF x_F = -(q_F + 2 Q_FB x_B).  A singular
    free block falls back to the minimum-norm solution; if the system is
    consistent with a nontrivial null space, the box-segment endpoints
    along each null direction are candidates too (the segment interior
    has constant gradient component zero, so value varies quadratically
    and is maximized at an endpoint or the stationary point itself).
    """
    n = len(q)
    F = [i for i in range(n) if pattern[i] == FREE]
    x = np.array([1.0 if pattern[i] == AT_ONE else 0.0 for i in range(n)])
    if not F:
        return [x]
    B = [i for i in range(n) if pattern[i] != FREE]
    QFF = Q[np.ix_(F, F)]
    rhs = -0.5 * q[F] - Q[np.ix_(F, B)] @ x[B]
    candidates = []
    try:
        xF = np.linalg.solve(QFF, rhs)
        null = None
    except np.linalg.LinAlgError:
        xF, _, rank, _ = np.linalg.lstsq(QFF, rhs, rcond=None)
        if not np.allclose(QFF @ xF, rhs, atol=1e-9):
            return []  # inconsistent: no stationary point interior to face
        if rank < len(F):
            _, s, Vt = np.linalg.svd(QFF)
            null = Vt[rank:]
        else:
            null = None

    def admit(xF_cand):
        if np.any(xF_cand < -_FEAS_TOL) or np.any(xF_cand > 1.0 + _FEAS_TOL):
            return
        xx = x.copy()
        xx[F] = np.clip(xF_cand, 0.0, 1.0)
        candidates.append(xx)

    admit(xF)
    if null is not None:
        for direction in null:
            # extreme steps keeping xF + t * direction inside the box
            lo, hi = -np.inf, np.inf
            for comp, base in zip(direction, xF):
                if abs(comp) < 1e-12:
                    continue
                t0, t1 = sorted(((0.0 - base) / comp, (1.0 - base) / comp))
                lo, hi = max(lo, t0), min(hi, t1)
            for t in (lo, hi):
                if np.isfinite(t):
                    admit(xF + t * direction)
    return candidates


def solve_global(inst: BoxQpInstance) -> GlobalSolution:
    """Global maximum by 3^n active-pattern enumeration.

    Deterministic: patterns are visited in lexicographic order and ties
    keep the earliest pattern (strictly-greater replacement).
    """
    n = inst.n
    if n > MAX_ORACLE_N:
        raise ValueError(f"n = {n} exceeds the oracle budget {MAX_ORACLE_N}")
    Q, q = inst.Q, inst.q
    best_value = -np.inf
    best_x = None
    best_pattern = None
    examined = 0
    for pattern in itertools.product((AT_ZERO, AT_ONE, FREE), repeat=n):
        for x in _stationary_points(Q, q, pattern):
            examined += 1
            value = float(x @ Q @ x + q @ x)
            if value > best_value:
                best_value, best_x, best_pattern = value, x, pattern
    best_x.setflags(write=False)
    return GlobalSolution(best_value, best_x, best_pattern, examined)


@dataclass(frozen=True)
class GapReport:
    """Relaxation bound vs the oracle optimum and a feasible value."""

    relax_value: float
    optimal_value: float
    feasible_value: float
    optimality_gap: float
    feasibility_gap: float


def certify_bound(inst: BoxQpInstance, relax_value: float,
                  feasible_x: np.ndarray | None = None) -> GapReport:
    """Gap report for a relaxation bound.

    ``optimality_gap`` is relax_value minus the global optimum;
    ``feasibility_gap`` measures against the supplied feasible point
    (the oracle maximizer when none is given).
    """
    sol = solve_global(inst)
    feas = sol.value if feasible_x is None else feasible_value(inst, feasible_x)
    return GapReport(relax_value, sol.value, feas,
                     relax_value - sol.value, relax_value - feas)
