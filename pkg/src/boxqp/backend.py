"""Solver backend contract and the cvxpy-based implementation.

A backend takes a ConicProgram and returns a BackendSolution in a single
synchronous call.  Tolerances are requested at 1e-8 and accepted at
1e-6; a failure is surfaced as status "numerical-trouble" with
diagnostics, never as a silent wrong value.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from .conic import Affine, ConicProgram

REQUEST_TOL = 1e-8
ACCEPT_TOL = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_TROUBLE = "numerical-trouble"


@dataclass
class BackendSolution:
    status: str
    value: float
    primal: np.ndarray | None
    solver: str = ""
    max_residual: float = float("nan")
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OPTIMAL


class SolverError(RuntimeError):
    """A backend failed to return a usable solution."""


def _rows_matrix(rows: list[Affine], num_vars: int):
    data, ri, ci = [], [], []
    consts = np.zeros(len(rows))
    for r, (d, c) in enumerate(rows):
        consts[r] = c
        for idx, coef in d.items():
            ri.append(r)
            ci.append(idx)
            data.append(coef)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), num_vars))
    return A, consts


def _affine_expr(aff: Affine, v: cp.Variable):
    d, c = aff
    if not d:
        return cp.Constant(c)
    idx = np.fromiter(d.keys(), dtype=int)
    coefs = np.fromiter(d.values(), dtype=float)
    vec = sp.csr_matrix((coefs, (np.zeros(len(idx), dtype=int), idx)),
                        shape=(1, v.shape[0]))
    return (vec @ v)[0] + c


class CvxpyBackend:
    """Backend over cvxpy; CLARABEL by default with an SCS fallback.

    Rotated cones are encoded through the standard 3-dimensional
    second-order reformulation ||(2u, v-w)|| <= v+w.
    """

    def __init__(self, solver: str | None = None, fallback: str | None = "SCS",
                 accept_tol: float | None = None, verbose: bool = False):
        self.solver = solver or os.environ.get("BOXQP_SOLVER", "CLARABEL")
        self.fallback = fallback
        self.accept_tol = accept_tol if accept_tol is not None else float(
            os.environ.get("BOXQP_TOL", ACCEPT_TOL))
        self.verbose = verbose

    def solve(self, program: ConicProgram) -> BackendSolution:
        v = cp.Variable(program.num_vars)
        cons = []
        if program.ineq_rows:
            A, b = _rows_matrix(program.ineq_rows, program.num_vars)
            cons.append(A @ v + b >= 0)
        if program.eq_rows:
            A, b = _rows_matrix(program.eq_rows, program.num_vars)
            cons.append(A @ v + b == 0)
        for block in program.psd_blocks:
            m = len(block)
            S = cp.Variable((m, m), symmetric=True)
            for r in range(m):
                for s in range(r, m):
                    cons.append(S[r, s] == _affine_expr(block[r][s], v))
            cons.append(S >> 0)
        for (u, w1, w2) in program.rsoc_rows:
            ue = _affine_expr(u, v)
            v1 = _affine_expr(w1, v)
            v2 = _affine_expr(w2, v)
            cons.append(cp.SOC(v1 + v2, cp.vstack([2 * ue, v1 - v2])))
        obj_expr = _affine_expr(program.objective, v)
        objective = cp.Maximize(obj_expr) if program.sense == "max" \
            else cp.Minimize(obj_expr)
        problem = cp.Problem(objective, cons)

        last_message = ""
        for solver in filter(None, (self.solver, self.fallback)):
            try:
                self._run(problem, solver)
            except (cp.SolverError, Exception) as exc:  # noqa: BLE001
                last_message = f"{solver}: {exc}"
                continue
            if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
                return BackendSolution(STATUS_INFEASIBLE, float("nan"), None,
                                       solver, message=problem.status)
            if v.value is None:
                last_message = f"{solver}: no primal ({problem.status})"
                continue
            primal = np.asarray(v.value, dtype=float)
            resid = self._residual(program, primal)
            if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) \
                    and resid <= self.accept_tol:
                return BackendSolution(STATUS_OPTIMAL, float(problem.value),
                                       primal, solver, resid)
            last_message = f"{solver}: status={problem.status} residual={resid:.2e}"
        return BackendSolution(STATUS_TROUBLE, float("nan"), None,
                               self.solver, message=last_message)

    def _run(self, problem: cp.Problem, solver: str):
        if solver == "CLARABEL":
            # tighter than the default so bound values are good to ~1e-7
            # even when the objective scale is in the hundreds
            problem.solve(solver=cp.CLARABEL, verbose=self.verbose,
                          tol_gap_abs=2e-9, tol_gap_rel=2e-9, tol_feas=2e-9)
        elif solver == "SCS":
            problem.solve(solver=cp.SCS, verbose=self.verbose, eps=1e-9,
                          max_iters=200_000)
        else:
            problem.solve(solver=solver, verbose=self.verbose)

    @staticmethod
    def _residual(program: ConicProgram, primal: np.ndarray) -> float:
        worst = 0.0
        if program.ineq_rows:
            A, b = _rows_matrix(program.ineq_rows, program.num_vars)
            worst = max(worst, float(-(A @ primal + b).min(initial=0.0)))
        if program.eq_rows:
            A, b = _rows_matrix(program.eq_rows, program.num_vars)
            worst = max(worst, float(np.abs(A @ primal + b).max(initial=0.0)))
        for block in program.psd_blocks:
            m = len(block)
            M = np.empty((m, m))
            for r in range(m):
                for s in range(m):
                    d, c = block[r][s]
                    M[r, s] = c + sum(coef * primal[i] for i, coef in d.items())
            M = 0.5 * (M + M.T)
            worst = max(worst, float(-np.linalg.eigvalsh(M).min(initial=0.0)))
        for (u, w1, w2) in program.rsoc_rows:
            uv = _value(u, primal)
            v1 = _value(w1, primal)
            v2 = _value(w2, primal)
            worst = max(worst, -v1, -v2, uv * uv - v1 * v2)
        return worst


def _value(aff: Affine, primal: np.ndarray) -> float:
    d, c = aff
    return c + sum(coef * primal[i] for i, coef in d.items())


def solve(program: ConicProgram, backend: CvxpyBackend) -> BackendSolution:
    """Single-call solve per the backend contract."""
    return backend.solve(program)


def default_backend() -> CvxpyBackend:
    return CvxpyBackend()
