"""Strengthened conic relaxations for box-constrained quadratic programs.

Core pieces: the lifted moment model, linear cut families with their
switching algebra, conic relaxation assembly with trilinear/SOC blocks,
exact oracles (disjunctive hull representation for n = 3 and active-set
enumeration for small n), a cutting-plane driver and benchmark tooling.
"""

from .backend import BackendSolution, CvxpyBackend, SolverError, solve
from .bench import GenSpec, builtin_bl, generate, load, parse, save, serialize
from .conic import (ConicProgram, RelaxationLevel, TrilinearBlock,
                    build_relaxation, soc_z_interval)
from .cuts import (LinearCut, SwitchPattern, apply_switch, canonical_family,
                   coefficient_norm, evaluate_cut, generate_family,
                   verify_catalogs, verify_validity_by_sampling)
from .driver import DriverConfig, SolveReport, extract_rank_one, run, separate
from .exact import (enumerate_extreme, is_dominated, m_hyperplanes,
                    max_violation, solve_exact_qpb3)
from .model import (BoxQpInstance, DimensionError, MomentPoint, SymIndex,
                    assemble_Y, feasible_value, objective_value)
from .oracle import GlobalSolution, certify_bound, solve_global

__version__ = "1.0.0"

__all__ = [
    "BackendSolution", "BoxQpInstance", "ConicProgram", "CvxpyBackend",
    "DimensionError", "DriverConfig", "GenSpec", "GlobalSolution",
    "LinearCut", "MomentPoint", "RelaxationLevel", "SolveReport",
    "SolverError", "SwitchPattern", "SymIndex", "TrilinearBlock",
    "apply_switch", "assemble_Y", "build_relaxation", "builtin_bl",
    "canonical_family", "certify_bound", "coefficient_norm",
    "enumerate_extreme", "evaluate_cut", "extract_rank_one",
    "feasible_value", "generate", "generate_family", "is_dominated", "load",
    "m_hyperplanes", "max_violation", "objective_value", "parse", "run",
    "save", "separate", "serialize", "soc_z_interval", "solve",
    "solve_exact_qpb3", "solve_global", "verify_catalogs",
    "verify_validity_by_sampling",
]
