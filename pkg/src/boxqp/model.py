"""Core problem and solution-space data types.

A BoxQP instance is the maximization of x'Qx + q'x over the unit box
[0,1]^n.  Relaxations work in the lifted space of moment points (x, X),
where X stands in for xx', assembled into the bordered matrix

    Y(x, X) = [[1, x'],
               [x, X ]].

Symmetric matrices are stored in packed lower-triangular order; the
SymIndex bijection below is the single source of truth for variable
ordering in conic programs built elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BOX_TOL = 1e-8


class DimensionError(ValueError):
    """Raised when instance / point dimensions do not match."""


@dataclass(frozen=True)
class SymIndex:
    """Canonical index (i, j) with i <= j into packed symmetric storage.

    The packed offset enumerates the lower triangle column-by-column:
    (0,0), (0,1), (1,1), (0,2), (1,2), (2,2), ...  It is a bijection
    onto 0..n(n+1)/2 - 1 for indices below n.
    """

    i: int
    j: int

    def __post_init__(self):
        if self.i > self.j:
            i, j = self.j, self.i
            object.__setattr__(self, "i", i)
            object.__setattr__(self, "j", j)

    @property
    def offset(self) -> int:
        return self.j * (self.j + 1) // 2 + self.i

    @classmethod
    def from_offset(cls, offset: int) -> "SymIndex":
        j = int((np.sqrt(8 * offset + 1) - 1) // 2)
        while (j + 1) * (j + 2) // 2 <= offset:
            j += 1
        i = offset - j * (j + 1) // 2
        return cls(i, j)


def packed_size(n: int) -> int:
    return n * (n + 1) // 2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BoxQpInstance:
    """Problem data for max x'Qx + q'x over the unit box."""

    Q: np.ndarray
    q: np.ndarray
    label: str | None = None

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionError(f"Q must be square, got shape {Q.shape}")
        if Q.shape[0] < 1:
            raise DimensionError("n must be >= 1")
        if q.shape != (Q.shape[0],):
            raise DimensionError(f"q has shape {q.shape}, expected ({Q.shape[0]},)")
        if not np.allclose(Q, Q.T, atol=1e-12, rtol=0.0):
            raise ValueError("Q must be symmetric")
        # mirror the lower triangle so Q == Q.T holds bit-for-bit
        Q = np.tril(Q) + np.tril(Q, -1).T
        object.__setattr__(self, "Q", _frozen(Q))
        object.__setattr__(self, "q", _frozen(q))

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class MomentPoint:
    """A point (x, X) in the lifted relaxation space.

    ``z`` optionally carries trilinear values keyed by index triples
    (i < j < k), used by the trilinear/SOC machinery.
    """

    x: np.ndarray
    X: np.ndarray
    z: dict[tuple[int, int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        X = np.asarray(self.X, dtype=float)
        n = x.shape[0]
        if X.shape != (n, n):
            raise DimensionError(f"X has shape {X.shape}, expected ({n}, {n})")
        if not np.allclose(X, X.T, atol=1e-9, rtol=0.0):
            raise ValueError("X must be symmetric")
        X = 0.5 * (X + X.T)
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "X", _frozen(X))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @classmethod
    def rank_one(cls, x: np.ndarray) -> "MomentPoint":
        x = np.asarray(x, dtype=float)
        return cls(x=x, X=np.outer(x, x))


def assemble_Y(p: MomentPoint) -> np.ndarray:
    """Bordered (n+1) x (n+1) matrix with 1 in the corner, x on the
    borders and X in the lower block."""
    n = p.n
    Y = np.empty((n + 1, n + 1))
    Y[0, 0] = 1.0
    Y[0, 1:] = p.x
    Y[1:, 0] = p.x
    Y[1:, 1:] = p.X
    return Y


def objective_value(inst: BoxQpInstance, p: MomentPoint) -> float:
    """Lifted objective Q.X + q'x (trace inner product)."""
    if p.n != inst.n:
        raise DimensionError(f"point has n={p.n}, instance has n={inst.n}")
    return float(np.tensordot(inst.Q, p.X) + inst.q @ p.x)


def feasible_value(inst: BoxQpInstance, x: np.ndarray) -> float:
    """Objective x'Qx + q'x at a box point; x is clamped to [0,1].

    Raises if x leaves the box by more than BOX_TOL (interior-point
    solutions carry small infeasibilities, hence the tolerance).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({inst.n},)")
    if np.any(x < -BOX_TOL) or np.any(x > 1.0 + BOX_TOL):
        raise ValueError(f"x outside the unit box beyond tolerance {BOX_TOL}")
    x = np.clip(x, 0.0, 1.0)
    return float(x @ inst.Q @ x + inst.q @ x)
