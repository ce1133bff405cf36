"""Exact description of the n = 3 lifted feasible hull via an ordering
disjunction, polyhedral outer approximations P0/P1 with their extreme
matrices, and violation-maximization utilities.

The unit box in three variables triangulates into six order simplices
0 <= x_i <= x_j <= x_k <= 1, one per permutation.  Lifting each simplex
through a doubly-nonnegative 4x4 block and recombining yields an exact
conic representation of the hull of rank-one box lifts; dropping the
PSD conditions gives the polyhedral sets P0 (and P1 when the quadratic
forms on the ones-row are partially restored) whose extreme matrices
drive the validity and tightness analysis of the cut families.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from .backend import ACCEPT_TOL, CvxpyBackend, STATUS_OPTIMAL, SolverError
from .conic import (Affine, RelaxationLevel, TrilinearBlock, VariableMap,
                    build_relaxation, cut_affine)
from .cuts import PAIR_SLOTS, LinearCut, coefficient_norm
from .model import BoxQpInstance, MomentPoint

#: the six variable orderings (i, j, k) meaning x_i <= x_j <= x_k
ORDERINGS: tuple[tuple[int, int, int], ...] = (
    (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))


@dataclass(frozen=True)
class SimplexOrdering:
    """One order simplex of the box triangulation.

    ``A`` holds the four simplex vertices as columns (the all-ones
    point, then dropping the smallest, the two smallest, and all
    coordinates); ``Abar`` stacks a ones row on top; ``M`` is its exact
    integer inverse, whose rows give the hyperplane description
    M Y M' >= 0 of the lifted simplex.
    """

    permutation: tuple[int, int, int]
    A: np.ndarray
    Abar: np.ndarray
    M: np.ndarray

    @classmethod
    def from_permutation(cls, perm) -> "SimplexOrdering":
        i, j, k = perm
        A = np.zeros((3, 4), dtype=int)
        A[i, 0] = 1
        A[j, 0] = A[j, 1] = 1
        A[k, 0] = A[k, 1] = A[k, 2] = 1
        Abar = np.vstack([np.ones(4, dtype=int), A])
        M = np.rint(np.linalg.inv(Abar)).astype(int)
        if not np.array_equal(Abar @ M, np.eye(4, dtype=int)):
            raise AssertionError(f"inverse of Abar is not integral for {perm}")
        for arr in (A, Abar, M):
            arr.setflags(write=False)
        return cls(tuple(perm), A, Abar, M)


def all_orderings() -> list[SimplexOrdering]:
    return [SimplexOrdering.from_permutation(p) for p in ORDERINGS]


def lifted_point(Y: np.ndarray) -> MomentPoint:
    """Moment point from a 4x4 lifted matrix with unit corner."""
    return MomentPoint(x=Y[1:, 0].copy(), X=0.5 * (Y[1:, 1:] + Y[1:, 1:].T))


# ---------------------------------------------------------------------------
# P0 / P1 extreme matrices
# ---------------------------------------------------------------------------


def _eij(i: int, j: int) -> np.ndarray:
    E = np.zeros((4, 4))
    E[i, j] = 1.0
    return E


def _p0_generators() -> list[np.ndarray]:
    """The 10 symmetrized unit generators (E_ij + E_ji)/2, i <= j."""
    return [0.5 * (_eij(i, j) + _eij(j, i))
            for i in range(4) for j in range(i, 4)]


def _p1_generators() -> list[np.ndarray]:
    """The 32 generators: vertices, edge midpoint forms, face forms and
    the ones-row couplings, each normalized to total entry sum 1."""
    gens: list[np.ndarray] = []
    e = np.ones(4)
    for i in range(4):
        gens.append(_eij(i, i))
    for i in range(4):
        for j in range(4):
            if j != i:
                gens.append(0.5 * _eij(i, i)
                            + 0.25 * (_eij(i, j) + _eij(j, i)))
    for i in range(4):
        for j, k in itertools.combinations([p for p in range(4) if p != i], 2):
            gens.append(_eij(i, i) / 3.0
                        + (_eij(i, j) + _eij(j, i)
                           + _eij(i, k) + _eij(k, i)) / 6.0)
    for i in range(4):
        ei = np.zeros(4)
        ei[i] = 1.0
        gens.append((np.outer(ei, e) + np.outer(e, ei)) / 8.0)
    return gens


@dataclass(frozen=True)
class ExtremeMatrixSet:
    """Lifted extreme matrices Abar X Abar' of P0 or P1 for one ordering."""

    which: str
    ordering: SimplexOrdering
    matrices: tuple[np.ndarray, ...]


def enumerate_extreme(which: str, ordering: SimplexOrdering) -> ExtremeMatrixSet:
    """All extreme matrices of the named polyhedral set for an ordering.

    Every generator has total entry sum 1, so each lifted matrix has a
    unit corner and is directly a moment point via ``lifted_point``.
    """
    if which == "P0":
        gens = _p0_generators()
    elif which == "P1":
        gens = _p1_generators()
    else:
        raise ValueError(f"unknown extreme set {which!r}; choose P0 or P1")
    Ab = ordering.Abar.astype(float)
    mats = []
    for G in gens:
        if abs(G.sum() - 1.0) > 1e-12:
            raise AssertionError("generator not sum-normalized")
        M = Ab @ G @ Ab.T
        M.setflags(write=False)
        mats.append(M)
    return ExtremeMatrixSet(which, ordering, tuple(mats))


def all_extreme_points(which: str) -> list[MomentPoint]:
    """Lifted extreme matrices over all six orderings as moment points."""
    return [lifted_point(Y)
            for ordering in all_orderings()
            for Y in enumerate_extreme(which, ordering).matrices]


def m_hyperplanes(ordering: SimplexOrdering) -> list[LinearCut]:
    """The 10 inequalities (M Y M')_{rs} >= 0, r <= s, as linear cuts.

    The six off-diagonal ones are the pairwise products of the ordering
    chain 0 <= x_i <= x_j <= x_k <= 1, i.e. RLT constraints along it.
    """
    M = ordering.M.astype(float)
    cuts = []
    for r in range(4):
        for s in range(r, 4):
            c = [0.0] * 3
            d = [0.0] * 3
            f = [0.0] * 3
            b = M[r, 0] * M[s, 0]
            for a in range(3):
                c[a] = M[r, 0] * M[s, a + 1] + M[r, a + 1] * M[s, 0]
                d[a] = M[r, a + 1] * M[s, a + 1]
            for slot, (a, bb) in enumerate(PAIR_SLOTS):
                f[slot] = (M[r, a + 1] * M[s, bb + 1]
                           + M[r, bb + 1] * M[s, a + 1])
            cuts.append(LinearCut((0, 1, 2), tuple(c), tuple(d), tuple(f), b,
                                  "SIMPLEX",
                                  f"p{''.join(map(str, ordering.permutation))}"
                                  f"m{r}{s}"))
    return cuts


# ---------------------------------------------------------------------------
# Exact disjunctive solve
# ---------------------------------------------------------------------------


def _disjunctive_moments():
    """cvxpy variables and constraints of the ordering disjunction;
    returns (x, X, constraints) with Y = sum_p Abar_p X_p Abar_p'."""
    cons = []
    lam = cp.Variable(6, nonneg=True)
    Ysum = 0
    for idx, ordering in enumerate(all_orderings()):
        Xp = cp.Variable((4, 4), symmetric=True)
        cons += [Xp >> 0, Xp >= 0, cp.sum(Xp) == lam[idx]]
        Ab = ordering.Abar.astype(float)
        Ysum = Ysum + Ab @ Xp @ Ab.T
    cons.append(cp.sum(lam) == 1)
    return Ysum[1:, 0], Ysum[1:, 1:], cons


def _solve_with_backend(problem: cp.Problem, backend: CvxpyBackend) -> float:
    last = ""
    for solver in filter(None, (backend.solver, backend.fallback)):
        try:
            backend._run(problem, solver)
        except Exception as exc:  # noqa: BLE001
            last = f"{solver}: {exc}"
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return float(problem.value)
        last = f"{solver}: status={problem.status}"
    raise SolverError(f"disjunctive solve failed ({last})")


def solve_exact_qpb3(inst: BoxQpInstance, backend: CvxpyBackend | None = None,
                     sense: str = "max") -> float:
    """Global optimum of an n = 3 instance via the exact disjunction."""
    if inst.n != 3:
        raise ValueError(f"exact disjunctive solve requires n = 3, got {inst.n}")
    backend = backend or CvxpyBackend()
    x, X, cons = _disjunctive_moments()
    obj = cp.trace(inst.Q @ X) + inst.q @ x
    objective = cp.Maximize(obj) if sense == "max" else cp.Minimize(obj)
    return _solve_with_backend(cp.Problem(objective, cons), backend)


def exact_min_objective(c9, backend: CvxpyBackend | None = None) -> float:
    """Minimum of a linear objective over the exact hull; ``c9`` is
    ordered (x1, x2, x3, X11, X22, X33, X12, X13, X23)."""
    backend = backend or CvxpyBackend()
    x, X, cons = _disjunctive_moments()
    obj = _objective9(c9, x, X)
    return _solve_with_backend(cp.Problem(cp.Minimize(obj), cons), backend)


def _objective9(c9, x, X):
    return (c9[0] * x[0] + c9[1] * x[1] + c9[2] * x[2]
            + c9[3] * X[0, 0] + c9[4] * X[1, 1] + c9[5] * X[2, 2]
            + c9[6] * X[0, 1] + c9[7] * X[0, 2] + c9[8] * X[1, 2])


# ---------------------------------------------------------------------------
# Violation maximization over relaxation levels (n = 3)
# ---------------------------------------------------------------------------

_DUMMY3 = BoxQpInstance(Q=np.zeros((3, 3)), q=np.zeros(3), label="dummy3")

DOMINATION_TOL = 1e-6


def objective9_affine(c9, vmap: VariableMap) -> Affine:
    """Affine form of a 9-vector objective on the canonical triple."""
    d: dict[int, float] = {}
    for a in range(3):
        if c9[a]:
            d[vmap.x(a)] = float(c9[a])
        if c9[3 + a]:
            d[vmap.X(a, a)] = float(c9[3 + a])
    for slot, (i, j) in enumerate(PAIR_SLOTS):
        if c9[6 + slot]:
            d[vmap.X(i, j)] = float(c9[6 + slot])
    return (d, 0.0)


def _level_program(level: RelaxationLevel, extra_cuts=()):
    blocks = [TrilinearBlock.full((0, 1, 2))] if level.soc else []
    return build_relaxation(_DUMMY3, level, active_cuts=list(extra_cuts),
                            blocks=blocks)


def relax_min_objective(c9, level: RelaxationLevel,
                        backend: CvxpyBackend | None = None,
                        extra_cuts=()) -> float:
    """Minimum of a 9-vector objective over a relaxation level (n = 3)."""
    backend = backend or CvxpyBackend()
    prog = _level_program(level, extra_cuts)
    prog = prog.with_objective(objective9_affine(c9, prog.vmap), "min")
    sol = backend.solve(prog)
    if sol.status != STATUS_OPTIMAL:
        raise SolverError(f"relaxation solve failed: {sol.message}")
    return sol.value


def max_violation(cut: LinearCut, level: RelaxationLevel,
                  backend: CvxpyBackend | None = None,
                  normalized: bool = False, extra_cuts=()) -> float:
    """Largest violation of a cut over a relaxation level.

    Maximizes -LHS subject to the level's constraints; nonnegative by
    construction (clamped at 0 when the cut is dominated).
    """
    backend = backend or CvxpyBackend()
    prog = _level_program(level, extra_cuts)
    d, const = cut_affine(cut, prog.vmap)
    neg = ({k: -v for k, v in d.items()}, -const)
    sol = backend.solve(prog.with_objective(neg, "max"))
    if sol.status != STATUS_OPTIMAL:
        raise SolverError(f"violation solve failed: {sol.message}")
    value = max(sol.value, 0.0)
    if normalized:
        value /= coefficient_norm(cut)
    return value


def family_max_violation(cuts, level: RelaxationLevel,
                         backend: CvxpyBackend | None = None,
                         normalized: bool = False) -> float:
    return max(max_violation(cut, level, backend, normalized) for cut in cuts)


def is_dominated(cut: LinearCut, level: RelaxationLevel,
                 extra_cuts=(), backend: CvxpyBackend | None = None,
                 tol: float = DOMINATION_TOL) -> bool:
    """Whether the level (plus extra cuts) already implies the cut."""
    return max_violation(cut, level, backend, extra_cuts=extra_cuts) <= tol


# ---------------------------------------------------------------------------
# Violation table grids
# ---------------------------------------------------------------------------

TABLE1_LEVELS = ("psd+diag", "psd+rlt", "psd+rlt+tri")
TABLE1_FAMILIES = ("RLT", "TRI", "ETRI1")
TABLE2_LEVELS = ("psd+diag", "psd+rlt", "psd+rlt+tri", "psd+rlt+tri+etri1")
TABLE2_FAMILIES = ("ETRI2", "ETRI3")


def violation_grid(levels, families,
                   backend: CvxpyBackend | None = None) -> dict:
    """Grid of (level, family, normalized) -> max violation."""
    from .cuts import canonical_family
    backend = backend or CvxpyBackend()
    grid = {}
    for lname in levels:
        level = RelaxationLevel.from_name(lname)
        for fam in families:
            cuts = canonical_family(fam)
            raw = [max_violation(c, level, backend) for c in cuts]
            grid[(lname, fam, False)] = max(raw)
            grid[(lname, fam, True)] = max(
                v / coefficient_norm(c) for v, c in zip(raw, cuts))
    return grid


def table1_grid(backend: CvxpyBackend | None = None) -> dict:
    return violation_grid(TABLE1_LEVELS, TABLE1_FAMILIES, backend)


def table2_grid(backend: CvxpyBackend | None = None) -> dict:
    return violation_grid(TABLE2_LEVELS, TABLE2_FAMILIES, backend)


def format_violation_table(grid: dict, levels, families) -> str:
    """Aligned plain-text layout with raw and normalized column groups."""
    header = (["Enforced"] + [f"{f}" for f in families]
              + [f"{f}/n" for f in families])
    rows = [header]
    for lname in levels:
        row = [lname.upper()]
        for normalized in (False, True):
            for fam in families:
                row.append(f"{grid[(lname, fam, normalized)]:.4f}")
        rows.append(row)
    widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths))
                     for r in rows)
