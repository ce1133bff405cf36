"""Instance generation, file I/O and experiment runners.

Random instances follow the integer-sparsity scheme: each q_i and each
Q_ij (i < j) is, with probability d%, an integer uniform on [-50, 50],
else zero.  Diagonal entries follow the same rule by default and can be
forced to zero.  Table runners reproduce the violation grids, the BL
relaxation ladder, the deterministic normalized-gap rows and a
generated benchmark suite with oracle optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import driver, exact, oracle
from .backend import CvxpyBackend
from .conic import RelaxationLevel
from .cuts import canonical_family, coefficient_norm
from .model import BoxQpInstance


def builtin_bl() -> BoxQpInstance:
    """The built-in n = 3 reference instance with exact optimum 1.0."""
    Q = np.array([[-2.25, -3.0, -3.0],
                  [-3.0, 0.0, -0.5],
                  [-3.0, -0.5, 1.0]])
    q = np.array([3.0, 1.0, 0.0])
    return BoxQpInstance(Q=Q, q=q, label="bl")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenSpec:
    """Deterministic recipe for one random instance."""

    n: int
    d: int            # density in percent
    number: int
    seed: int = 0
    diag: str = "same"  # "same": Q_ii drawn like off-diagonals; "zero": 0

    def __post_init__(self):
        if not 0 <= self.d <= 100:
            raise ValueError("density must be in 0..100")
        if self.diag not in ("same", "zero"):
            raise ValueError("diag must be 'same' or 'zero'")

    @property
    def label(self) -> str:
        return f"{self.n:02d}-{self.d:03d}-{self.number}"


def generate(spec: GenSpec) -> BoxQpInstance:
    """Instance from a GenSpec; identical spec gives identical data.

    Draw order is fixed: q_0..q_{n-1}, then Q rows i = 0..n-1 with
    j = i..n-1 (diagonal first in each row).
    """
    rng = np.random.default_rng(
        np.random.SeedSequence([spec.seed, spec.n, spec.d, spec.number]))
    p = spec.d / 100.0

    def draw() -> float:
        if rng.random() < p:
            return float(rng.integers(-50, 51))
        return 0.0

    n = spec.n
    q = np.array([draw() for _ in range(n)])
    Q = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            if i == j:
                Q[i, i] = draw() if spec.diag == "same" else 0.0
            else:
                Q[i, j] = Q[j, i] = draw()
    return BoxQpInstance(Q=Q, q=q, label=spec.label)


def default_suite(seed: int = 0, count: int = 50,
                  diag: str = "same") -> list[GenSpec]:
    """The regenerated benchmark suite: ``count`` specs cycling
    n = 5..10 with densities 50/75/90."""
    densities = (50, 75, 90)
    specs = []
    number = 0
    while len(specs) < count:
        for n in range(5, 11):
            for d in densities:
                if len(specs) >= count:
                    break
                specs.append(GenSpec(n=n, d=d, number=number, seed=seed,
                                     diag=diag))
        number += 1
    return specs


# ---------------------------------------------------------------------------
# Instance file I/O
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    """Malformed instance file; message carries the offending line."""


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def serialize(inst: BoxQpInstance) -> str:
    """Canonical text form; parse(serialize(x)) == x bit-for-bit."""
    lines = []
    if inst.label:
        lines.append(f"# {inst.label}")
    lines.append(f"n {inst.n}")
    lines.append("q " + " ".join(_fmt(v) for v in inst.q))
    for row in inst.Q:
        lines.append("Q " + " ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse(text: str) -> BoxQpInstance:
    n = None
    q = None
    rows: list[list[float]] = []
    label = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if label is None and line[1:].strip():
                label = line[1:].strip()
            continue
        parts = line.split()
        key, vals = parts[0], parts[1:]
        try:
            if key == "n":
                if n is not None:
                    raise ParseError(f"line {lineno}: duplicate n line")
                n = int(vals[0])
            elif key == "q":
                if n is None:
                    raise ParseError(f"line {lineno}: q before n")
                q = [float(v) for v in vals]
                if len(q) != n:
                    raise ParseError(
                        f"line {lineno}: expected {n} q entries, got {len(q)}")
            elif key == "Q":
                if n is None:
                    raise ParseError(f"line {lineno}: Q before n")
                row = [float(v) for v in vals]
                if len(row) != n:
                    raise ParseError(
                        f"line {lineno}: expected {n} Q entries, got {len(row)}")
                rows.append(row)
            else:
                raise ParseError(f"line {lineno}: unknown key {key!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}: cannot parse {line!r}: {exc}") \
                from None
    if n is None or q is None:
        raise ParseError("missing n or q line")
    if len(rows) != n:
        raise ParseError(f"expected {n} Q rows, got {len(rows)}")
    Q = np.array(rows)
    bad = [(i, j) for i in range(n) for j in range(i + 1, n)
           if Q[i, j] != Q[j, i]]
    if bad:
        i, j = bad[0]
        raise ParseError(f"Q is not symmetric: Q[{i}][{j}]={Q[i, j]} "
                         f"vs Q[{j}][{i}]={Q[j, i]}")
    return BoxQpInstance(Q=Q, q=np.array(q), label=label)


def load(path) -> BoxQpInstance:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def save(inst: BoxQpInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(inst))


# ---------------------------------------------------------------------------
# Table runners
# ---------------------------------------------------------------------------


@dataclass
class TableArtifact:
    """Plain-text table plus machine-readable (table, row, col, value)."""

    name: str
    text: str
    rows: list[tuple[str, str, str, float]] = field(default_factory=list)
    suite_rows: list = field(default_factory=list)

    def delimited(self) -> str:
        return "\n".join(f"{t}\t{r}\t{c}\t{v:.5f}"
                         for t, r, c, v in self.rows) + "\n"


LADDER_LEVELS = ("psd+rlt+tri", "+etri1", "+etri1/2/3", "+soc")


def bl_ladder(backend: CvxpyBackend | None = None,
              config: driver.DriverConfig | None = None) -> dict[str, float]:
    """BL relaxation values along the level ladder, via driver runs."""
    backend = backend or CvxpyBackend()
    inst = builtin_bl()
    out = {}
    for name in LADDER_LEVELS:
        report = driver.run(inst, RelaxationLevel.from_name(name),
                            config or driver.DriverConfig(extract=False),
                            backend)
        if report.status not in ("ok", "round-limit"):
            raise RuntimeError(f"driver failed at {name}: {report.status}")
        out[name] = report.final_value
    return out


def _grid_artifact(name: str, grid: dict, levels, families) -> TableArtifact:
    rows = [(name, lname, f"{fam}{':n' if normalized else ''}",
             grid[(lname, fam, normalized)])
            for lname in levels for normalized in (False, True)
            for fam in families]
    text = exact.format_violation_table(grid, levels, families)
    return TableArtifact(name, text, rows)


def t4_deterministic_objectives() -> list[tuple[str, str, np.ndarray]]:
    """The three exactly-checkable rows: (row label, level, unit c9)."""
    c_rlt = np.zeros(9)
    c_rlt[6] = c_rlt[7] = 1.0          # X12 + X13, two RLT lower bounds
    tri = canonical_family("TRI")[0]
    c_tri = np.array(tri.coefficients()[:9])
    etri1 = min(canonical_family("ETRI1"), key=coefficient_norm)
    c_etri1 = np.array(etri1.coefficients()[:9])
    rows = [("sum-of-2-RLT", "psd+diag", c_rlt),
            ("TRI", "psd+rlt", c_tri),
            ("min-norm-ETRI1", "psd+rlt+tri", c_etri1)]
    return [(label, level, c / np.linalg.norm(c)) for label, level, c in rows]


def objective_gap(c9, level: RelaxationLevel,
                  backend: CvxpyBackend | None = None) -> float:
    """Gap (exact min - relaxation min) for a linear objective; the
    normalized distance the relaxation reaches outside the hull."""
    backend = backend or CvxpyBackend()
    return (exact.exact_min_objective(c9, backend)
            - exact.relax_min_objective(c9, level, backend))


def run_tables(which: str, backend: CvxpyBackend | None = None,
               seed: int = 0) -> TableArtifact:
    backend = backend or CvxpyBackend()
    which = which.lower()
    if which == "t1":
        return _grid_artifact("t1", exact.table1_grid(backend),
                              exact.TABLE1_LEVELS, exact.TABLE1_FAMILIES)
    if which == "t2":
        return _grid_artifact("t2", exact.table2_grid(backend),
                              exact.TABLE2_LEVELS, exact.TABLE2_FAMILIES)
    if which == "t3":
        ladder = bl_ladder(backend)
        rows = [("t3", "bl", name, value) for name, value in ladder.items()]
        text = "\n".join(f"{name:>14}  {value:.5f}"
                         for name, value in ladder.items())
        return TableArtifact("t3", text, rows)
    if which in ("t4", "t4-deterministic"):
        rows = []
        for label, lname, c9 in t4_deterministic_objectives():
            gap = objective_gap(c9, RelaxationLevel.from_name(lname), backend)
            rows.append(("t4", lname, label, gap))
        text = "\n".join(f"{lname:>12}  {gap:.4f}  {label}"
                         for _, lname, label, gap in rows)
        return TableArtifact("t4", text, rows)
    if which in ("t5", "t5t6", "t5t6-style"):
        return run_suite(default_suite(seed=seed), backend)
    raise ValueError(f"unknown table {which!r}")


@dataclass
class SuiteRow:
    label: str
    opt: float
    values: dict[str, float]
    feasible: float
    closed: bool          # +soc value matches the oracle optimum
    extracted: bool       # a rank-one feasible point matched the bound
    num_etri: int
    num_soc_blocks: int

    def gaps(self) -> dict[str, float]:
        return {name: value - self.opt for name, value in self.values.items()}


def run_suite(specs, backend: CvxpyBackend | None = None,
              levels=LADDER_LEVELS,
              config: driver.DriverConfig | None = None) -> TableArtifact:
    """Value and gap tables over generated instances, with oracle OPT."""
    backend = backend or CvxpyBackend()
    rows = []
    suite_rows = []
    for spec in specs:
        inst = generate(spec) if isinstance(spec, GenSpec) else spec
        opt = oracle.solve_global(inst).value
        values = {}
        feas = -math.inf
        extracted = False
        num_etri = num_blocks = 0
        for name in levels:
            report = driver.run(inst, RelaxationLevel.from_name(name),
                                config or driver.DriverConfig(), backend)
            if report.status not in ("ok", "round-limit"):
                rows.append(("t5", inst.label or "?", name, math.nan))
                continue
            values[name] = report.final_value
            feas = max(feas, report.feasible_value)
            if name == levels[-1]:
                num_etri = report.num_etri_cuts
                num_blocks = report.num_soc_blocks
                if report.extracted_x is not None and \
                        abs(report.feasible_value - report.final_value) <= 1e-4:
                    extracted = True
        closed = levels[-1] in values and \
            values[levels[-1]] - opt < 1e-4
        row = SuiteRow(inst.label or "?", opt, values, feas, closed,
                       extracted, num_etri, num_blocks)
        suite_rows.append(row)
        rows.append(("t5", row.label, "OPT", opt))
        for name, value in values.items():
            rows.append(("t5", row.label, name, value))
            rows.append(("t5", row.label, f"gap:{name}", value - opt))
    header = f"{'instance':>12} {'OPT':>10} " + " ".join(
        f"{name:>12}" for name in levels)
    lines = [header]
    for row in suite_rows:
        lines.append(f"{row.label:>12} {row.opt:>10.5f} " + " ".join(
            f"{row.values.get(name, math.nan):>12.5f}" for name in levels))
    artifact = TableArtifact("t5", "\n".join(lines), rows)
    artifact.suite_rows = suite_rows
    return artifact


# ---------------------------------------------------------------------------
# Randomized max-gap search
# ---------------------------------------------------------------------------


def search_max_gap(level: RelaxationLevel, budget: int = 50, seed: int = 0,
                   backend: CvxpyBackend | None = None,
                   refine: int = 20,
                   extra_candidates=()) -> tuple[float, np.ndarray]:
    """Best normalized gap found over unit objectives.

    Evaluates up to ``budget`` candidate directions -- the catalog cut
    coefficient vectors first (positive gaps live in narrow cones around
    them; blind sampling virtually never lands inside), then random unit
    9-vectors -- and refines the incumbent with shrinking Gaussian
    perturbations.  Returns (gap, objective).
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    backend = backend or CvxpyBackend()
    rng = np.random.default_rng(seed)
    candidates = [np.asarray(c, dtype=float) for c in extra_candidates]
    for fam in ("TRI", "ETRI1", "ETRI2", "ETRI3", "RLT"):
        for cut in canonical_family(fam):
            c = np.array(cut.coefficients()[:9], dtype=float)
            candidates.append(c / np.linalg.norm(c))
    while len(candidates) < budget:
        c = rng.standard_normal(9)
        candidates.append(c / np.linalg.norm(c))
    best_gap = -math.inf
    best_c = None
    for c in candidates[:budget]:
        gap = objective_gap(c, level, backend)
        if gap > best_gap:
            best_gap, best_c = gap, c
    sigma = 0.05
    for _ in range(refine):
        c = best_c + sigma * rng.standard_normal(9)
        c /= np.linalg.norm(c)
        gap = objective_gap(c, level, backend)
        if gap > best_gap:
            best_gap, best_c = gap, c
        else:
            sigma *= 0.8
    return max(best_gap, 0.0), best_c


def search_gap_ladder(levels=LADDER_LEVELS, budget: int = 120, seed: int = 0,
                      backend: CvxpyBackend | None = None,
                      refine: int = 15) -> dict[str, float]:
    """Best found gaps per level, searched strongest level first.

    Each stronger level's best direction is re-evaluated at the weaker
    levels (the same direction always gaps at least as much there), so
    the reported values are non-increasing along the ladder.
    """
    backend = backend or CvxpyBackend()
    incumbents: list[np.ndarray] = []
    out: dict[str, float] = {}
    for name in reversed(list(levels)):
        gap, c = search_max_gap(RelaxationLevel.from_name(name),
                                budget=budget + len(incumbents), seed=seed,
                                backend=backend, refine=refine,
                                extra_candidates=incumbents)
        out[name] = gap
        if c is not None:
            incumbents.append(c)
    return {name: out[name] for name in levels}
