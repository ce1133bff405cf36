"""Round-based cutting-plane driver.

Starting from the PSD+RLT+TRI relaxation, extended-triangle cuts are
separated in phases (ETRI1 first, then ETRI2/3), each round adding at
most a capped number of most-violated cuts and re-solving.  When the
SOC phase is enabled, triples whose relaxation point admits no
consistent trilinear value (empty z-interval) receive a trilinear block
with its hull rows and violated rotated-SOC caps.  A final report
carries the round log, a rank diagnostic and, when the solution is
rank-one, the extracted feasible point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .backend import CvxpyBackend, STATUS_OPTIMAL, SolverError
from .conic import (RelaxationLevel, TrilinearBlock, all_triples,
                    build_relaxation, soc_cap_constraints, soc_cap_z_bounds,
                    soc_z_interval)
from .cuts import LinearCut, canonical_family, coefficient_norm, evaluate_cut
from .model import BoxQpInstance, MomentPoint, assemble_Y, feasible_value

FAMILY_ORDER = {"ETRI1": 0, "ETRI2": 1, "ETRI3": 2, "TRI": 3, "RLT": 4}

RANK_RATIO_TOL = 1e-5


@dataclass(frozen=True)
class DriverConfig:
    max_rounds: int = 20
    per_round_cap: int = 10
    threshold: float = 1e-5           # normalized violation threshold
    seed: int = 0                     # rank-one extraction RNG seed
    soc_only_violated: bool = True    # add only caps violated at the point
    extract: bool = True              # attempt rank-one extraction at the end

    def __post_init__(self):
        if self.max_rounds < 1 or self.per_round_cap < 1:
            raise ValueError("max_rounds and per_round_cap must be >= 1")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")


@dataclass(frozen=True)
class RoundLog:
    round: int
    phase: str
    value: float
    cuts_added: tuple[tuple[str, int], ...] = ()
    blocks_added: int = 0


@dataclass
class SolveReport:
    instance_label: str
    rounds: list[RoundLog] = field(default_factory=list)
    final_value: float = math.nan
    final_point: MomentPoint | None = None
    feasible_value: float = math.nan
    rank_ratio: float = math.nan
    num_etri_cuts: int = 0
    num_soc_blocks: int = 0
    active_cuts: list[LinearCut] = field(default_factory=list)
    blocks: list[TrilinearBlock] = field(default_factory=list)
    extracted_x: np.ndarray | None = None
    status: str = "ok"

    @property
    def rank_one(self) -> bool:
        return self.rank_ratio <= RANK_RATIO_TOL

    def log_lines(self) -> list[str]:
        return [f"round {r.round} phase={r.phase} value={r.value:.7f} "
                f"cuts={r.cuts_added} blocks={r.blocks_added}"
                for r in self.rounds]


def separate(p: MomentPoint, families, per_round_cap: int,
             threshold: float) -> list[LinearCut]:
    """Most-violated family cuts at a point, by normalized violation.

    Returns up to ``per_round_cap`` cuts with violation / coefficient
    norm above ``threshold``, sorted by normalized violation descending;
    ties break on (triple, family order, tag) for determinism.
    """
    found = []
    for triple in all_triples(p.n):
        for fam in families:
            for cut in canonical_family(fam):
                placed = cut.on_triple(triple)
                violation = -evaluate_cut(placed, p) / coefficient_norm(cut)
                if violation > threshold:
                    found.append((violation, placed))
    found.sort(key=lambda t: (-t[0], t[1].triple, FAMILY_ORDER[t[1].family],
                              t[1].tag))
    return [cut for _, cut in found[:per_round_cap]]


def _phases(level: RelaxationLevel) -> list[tuple[str, tuple[str, ...]]]:
    phases = []
    if level.etri1:
        phases.append(("etri1", ("ETRI1",)))
    if level.etri2 or level.etri3:
        fams = tuple(f for f, on in (("ETRI2", level.etri2),
                                     ("ETRI3", level.etri3)) if on)
        phases.append(("etri23", fams))
    if level.soc:
        phases.append(("soc", ()))
    return phases


def _trigger_blocks(p: MomentPoint, existing, threshold: float,
                    only_violated: bool) -> list[TrilinearBlock]:
    """Trilinear blocks for triples whose z-interval is empty at p."""
    have = {b.triple for b in existing}
    added = []
    all_caps = soc_cap_constraints()
    for triple in all_triples(p.n):
        if triple in have:
            continue
        L, U = soc_z_interval(p, triple, all_caps)
        if L <= U + threshold:
            continue
        caps = all_caps
        if only_violated:
            # keep caps excluding the linear z-interval midpoint at p
            lin_lo, lin_hi = soc_z_interval(p, triple, soc_terms=[])
            mid = 0.5 * (lin_lo + lin_hi)
            caps = []
            for cap in all_caps:
                lo, hi = soc_cap_z_bounds(*cap, p, triple)
                if not (lo <= mid <= hi):
                    caps.append(cap)
            if not caps:
                caps = all_caps
        added.append(TrilinearBlock(triple, tuple(caps)))
    return added


def run(inst: BoxQpInstance, level: RelaxationLevel,
        config: DriverConfig | None = None,
        backend: CvxpyBackend | None = None) -> SolveReport:
    """Iterated solve / separate / add loop through the level's phases."""
    config = config or DriverConfig()
    backend = backend or CvxpyBackend()
    base = replace(level, etri1=False, etri2=False, etri3=False, soc=False)
    phases = _phases(level)
    report = SolveReport(instance_label=inst.label or "")
    phase_idx = -1  # -1: base solve only, then advance through phases
    point = None
    for rnd in range(1, config.max_rounds + 1):
        prog = build_relaxation(inst, base, active_cuts=report.active_cuts,
                                blocks=report.blocks)
        sol = backend.solve(prog)
        if sol.status != STATUS_OPTIMAL:
            report.status = f"backend-failure: {sol.message}"
            return report
        point = prog.vmap.point(sol.primal)
        value = sol.value
        cuts_added: list[LinearCut] = []
        blocks_added: list[TrilinearBlock] = []
        # feasible value <= optimum <= bound: a tight sandwich certifies
        # optimality and no cut or block can improve the bound further
        fv = feasible_value(inst, np.clip(point.x, 0.0, 1.0))
        if value - fv <= 1e-6 * max(1.0, abs(value)):
            phase_idx = len(phases)
        # advance through phases until one makes progress at this point
        while phase_idx < len(phases):
            if phase_idx >= 0:
                name, fams = phases[phase_idx]
                if name == "soc":
                    blocks_added = _trigger_blocks(point, report.blocks,
                                                   config.threshold,
                                                   config.soc_only_violated)
                else:
                    cuts_added = separate(point, fams, config.per_round_cap,
                                          config.threshold)
                if cuts_added or blocks_added:
                    break
            phase_idx += 1
        by_family: dict[str, int] = {}
        for cut in cuts_added:
            by_family[cut.family] = by_family.get(cut.family, 0) + 1
        phase_name = phases[phase_idx][0] if phase_idx < len(phases) else "done"
        report.rounds.append(RoundLog(rnd, phase_name, value,
                                      tuple(sorted(by_family.items())),
                                      len(blocks_added)))
        report.active_cuts.extend(cuts_added)
        report.blocks.extend(blocks_added)
        if not cuts_added and not blocks_added:
            break
    else:
        report.status = "round-limit"
    report.final_value = value
    report.final_point = point
    report.num_etri_cuts = sum(1 for c in report.active_cuts
                               if c.family.startswith("ETRI"))
    report.num_soc_blocks = len(report.blocks)
    Y = assemble_Y(point)
    ev = np.linalg.eigvalsh(Y)[::-1]
    report.rank_ratio = float(max(ev[1], 0.0) / ev[0])
    report.feasible_value = feasible_value(inst, np.clip(point.x, 0.0, 1.0))
    if report.rank_one:
        report.extracted_x = np.clip(point.x, 0.0, 1.0)
    elif config.extract:
        x = extract_rank_one(inst, report.final_value, base,
                             report.active_cuts, report.blocks, backend,
                             config.seed)
        if x is not None:
            report.extracted_x = x
            report.feasible_value = feasible_value(inst, x)
    return report


def extract_rank_one(inst: BoxQpInstance, pinned_value: float,
                     base_level: RelaxationLevel, active_cuts, blocks,
                     backend: CvxpyBackend | None = None,
                     seed: int = 0) -> np.ndarray | None:
    """Recover a feasible x from a tight relaxation.

    Pins the objective to ``pinned_value`` with an equality row and
    re-solves under a seeded random linear objective over (x, X); if the
    resulting moment matrix is rank-one (eigenvalue ratio below
    RANK_RATIO_TOL) the x part is returned, else None.
    """
    backend = backend or CvxpyBackend()
    prog = build_relaxation(inst, base_level, active_cuts=list(active_cuts),
                            blocks=list(blocks))
    d, c = prog.objective
    prog.eq_rows.append((dict(d), c - pinned_value))
    rng = np.random.default_rng(seed)
    n = inst.n
    obj: dict[int, float] = {}
    for i in range(n):
        obj[prog.vmap.x(i)] = float(rng.standard_normal())
        for j in range(i, n):
            obj[prog.vmap.X(i, j)] = float(rng.standard_normal())
    sol = backend.solve(prog.with_objective((obj, 0.0), "max"))
    if sol.status != STATUS_OPTIMAL:
        raise SolverError(f"extraction solve failed: {sol.message}")
    point = prog.vmap.point(sol.primal)
    ev = np.linalg.eigvalsh(assemble_Y(point))[::-1]
    if max(ev[1], 0.0) / ev[0] > RANK_RATIO_TOL:
        return None
    return np.clip(point.x, 0.0, 1.0)
