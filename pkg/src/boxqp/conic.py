"""Conic program assembly: PSD moment block, linear cut rows, trilinear
blocks with rotated second-order-cone strengthenings.

Programs are built as a solver-agnostic description (ConicProgram) over a
flat variable vector laid out as x entries, packed symmetric X entries,
then one z entry per trilinear block.  Affine forms are (coefficient
dict, constant) pairs over that vector.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cuts import PAIR_SLOTS, LinearCut, canonical_family
from .model import BoxQpInstance, MomentPoint, SymIndex, packed_size

Affine = tuple[dict[int, float], float]


@dataclass(frozen=True)
class RelaxationLevel:
    """Constraint families enforced on top of the PSD moment condition.

    When ``soc`` is set, triples carrying a trilinear z-block get the
    extended linear system in place of their plain RLT/TRI rows.
    """

    diag: bool = True
    rlt: bool = False
    tri: bool = False
    etri1: bool = False
    etri2: bool = False
    etri3: bool = False
    soc: bool = False

    @classmethod
    def from_name(cls, name: str) -> "RelaxationLevel":
        key = name.strip().lower().replace(" ", "")
        try:
            return PRESETS[key]
        except KeyError:
            raise ValueError(f"unknown relaxation level {name!r}; "
                             f"choose from {sorted(PRESETS)}") from None

    def cut_families(self) -> list[str]:
        fams = []
        if self.diag and not self.rlt:
            fams.append("DIAG")
        if self.rlt:
            fams.append("RLT")   # includes DIAG
        if self.tri:
            fams.append("TRI")
        for fam, flag in (("ETRI1", self.etri1), ("ETRI2", self.etri2),
                          ("ETRI3", self.etri3)):
            if flag:
                fams.append(fam)
        return fams


PRESETS = {
    "psd+diag": RelaxationLevel(),
    "psd+rlt": RelaxationLevel(rlt=True),
    "psd+rlt+tri": RelaxationLevel(rlt=True, tri=True),
    "+etri1": RelaxationLevel(rlt=True, tri=True, etri1=True),
    "+etri1/2/3": RelaxationLevel(rlt=True, tri=True, etri1=True, etri2=True,
                                  etri3=True),
    "+soc": RelaxationLevel(rlt=True, tri=True, etri1=True, etri2=True,
                            etri3=True, soc=True),
}
PRESETS["psd+rlt+tri+etri1"] = PRESETS["+etri1"]
PRESETS["psd+rlt+tri+etri1/2/3"] = PRESETS["+etri1/2/3"]
PRESETS["psd+rlt+tri+etri1/2/3+soc"] = PRESETS["+soc"]


# ---------------------------------------------------------------------------
# Rotated SOC constraints on the canonical triple.
#
# Constraints are (u, v, w) triples of 11-vectors over the canonical
# coordinates (x1, x2, x3, X11, X22, X33, X12, X13, X23, z, 1), meaning
# (u.t)^2 <= (v.t)(w.t) with v.t >= 0 and w.t >= 0.
# ---------------------------------------------------------------------------

_Z = 9
_CONST = 10


def _switch_vec11(v, S) -> tuple[float, ...]:
    """Apply switchings to an 11-vector; z maps to the switched trilinear
    product, e.g. switching x1 sends z to X23 - z."""
    c = list(v[:3])
    d = list(v[3:6])
    f = list(v[6:9])
    zc = v[_Z]
    b = v[_CONST]
    out = [0.0] * 11
    zvec = [0.0] * 11
    zvec[_Z] = (-1.0) ** len(S)
    if len(S) == 1:
        rest = tuple(p for p in range(3) if p != S[0])
        zvec[3 + 3 + PAIR_SLOTS.index(rest)] = 1.0
    elif len(S) == 2:
        a = next(p for p in range(3) if p not in S)
        zvec[a] = 1.0
        for s in S:
            zvec[6 + PAIR_SLOTS.index(tuple(sorted((a, s))))] = -1.0
    elif len(S) == 3:
        zvec[_CONST] = 1.0
        zvec[0] = zvec[1] = zvec[2] = -1.0
        zvec[6] = zvec[7] = zvec[8] = 1.0
    for t in range(11):
        out[t] += zc * zvec[t]
    for a in S:
        b += c[a]
        c[a] = -c[a]
        b += d[a]
        c[a] -= 2 * d[a]
    for slot, (i, j) in enumerate(PAIR_SLOTS):
        si, sj = i in S, j in S
        if si and sj:
            b += f[slot]
            c[i] -= f[slot]
            c[j] -= f[slot]
        elif si:
            c[j] += f[slot]
            f[slot] = -f[slot]
        elif sj:
            c[i] += f[slot]
            f[slot] = -f[slot]
    for a in range(3):
        out[a] += c[a]
        out[3 + a] += d[a]
        out[6 + a] += f[a]
    out[_CONST] += b
    return tuple(out)


def _perm_vec11(v, perm) -> tuple[float, ...]:
    c2, d2, f2 = [0.0] * 3, [0.0] * 3, [0.0] * 3
    for p in range(3):
        c2[perm[p]] = v[p]
        d2[perm[p]] = v[3 + p]
    for slot, (i, j) in enumerate(PAIR_SLOTS):
        f2[PAIR_SLOTS.index(tuple(sorted((perm[i], perm[j]))))] = v[6 + slot]
    return tuple(c2 + d2 + f2 + [v[_Z], v[_CONST]])


def _canon_soc(u, v, w):
    if (u[_Z], *u) < tuple(-t for t in (u[_Z], *u)):
        u = tuple(-t for t in u)
    v, w = sorted((v, w))
    return (u, v, w)


def _diag_product_bases():
    """z^2 <= X_aa * X_bc for each position a with complement pair (b, c)."""
    out = []
    for a in range(3):
        rest = tuple(p for p in range(3) if p != a)
        u = [0.0] * 11
        v = [0.0] * 11
        w = [0.0] * 11
        u[_Z] = 1.0
        v[3 + a] = 1.0
        w[6 + PAIR_SLOTS.index(rest)] = 1.0
        out.append((tuple(u), tuple(v), tuple(w)))
    return out


def _pair_shift_base():
    """(X12 + z)^2 <= X11 (X22 + 3 X23), the sharper cap behind ETRI3."""
    u = [0.0] * 11
    v = [0.0] * 11
    w = [0.0] * 11
    u[6] = 1.0
    u[_Z] = 1.0
    v[3] = 1.0
    w[4] = 1.0
    w[8] = 3.0
    return (tuple(u), tuple(v), tuple(w))


def soc_cap_constraints(all_switchings: bool = True,
                        kinds: tuple[str, ...] = ("diag", "pair")) -> list[tuple]:
    """Canonical rotated-SOC cap list: the diagonal-product caps with all
    8 switchings, plus the pair-shifted cap with all permutations and
    switchings, deduplicated.  With ``all_switchings`` False, only the
    unswitched forms are kept; ``kinds`` selects the cap shapes."""
    subsets = list(itertools.chain.from_iterable(
        itertools.combinations(range(3), k) for k in range(4)))
    if not all_switchings:
        subsets = [()]
    seen = {}
    if "diag" in kinds:
        for base in _diag_product_bases():
            for S in subsets:
                cand = tuple(_switch_vec11(t, S) for t in base)
                seen.setdefault(_canon_soc(*cand), cand)
    if "pair" in kinds:
        base = _pair_shift_base()
        for S in subsets:
            for perm in itertools.permutations(range(3)):
                cand = tuple(_perm_vec11(_switch_vec11(t, S), perm)
                             for t in base)
                seen.setdefault(_canon_soc(*cand), cand)
    return sorted(seen)


@dataclass(frozen=True)
class TrilinearBlock:
    """A lifted trilinear variable z ~ x_i x_j x_k on a triple, with the
    8 hull linear constraints and a set of rotated SOC caps."""

    triple: tuple[int, int, int]
    soc_terms: tuple = ()

    @classmethod
    def full(cls, triple, all_switchings: bool = True) -> "TrilinearBlock":
        return cls(tuple(triple), tuple(soc_cap_constraints(all_switchings)))


def trilinear_linear_rows() -> list[tuple[float, ...]]:
    """The 8 hull constraints on (x, X_off, z) as canonical 11-vectors,
    each meaning vec . t >= 0."""
    rows = []

    def row(**kw):
        v = [0.0] * 11
        for key, val in kw.items():
            v[{"x1": 0, "x2": 1, "x3": 2, "X12": 6, "X13": 7, "X23": 8,
               "z": _Z, "const": _CONST}[key]] = val
        rows.append(tuple(v))

    row(z=1)                                           # z >= 0
    row(X12=1, z=-1)                                   # X12 - z >= 0
    row(X13=1, z=-1)
    row(X23=1, z=-1)
    row(x1=1, z=1, X12=-1, X13=-1)                     # x1 + z - X12 - X13 >= 0
    row(x2=1, z=1, X12=-1, X23=-1)
    row(x3=1, z=1, X13=-1, X23=-1)
    row(X12=1, X13=1, X23=1, const=1, x1=-1, x2=-1, x3=-1, z=-1)
    return rows


# ---------------------------------------------------------------------------
# Variable layout and program container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VariableMap:
    """Flat layout: x_0..x_{n-1}, packed X entries, then z per block triple."""

    n: int
    z_triples: tuple[tuple[int, int, int], ...] = ()

    @property
    def num_vars(self) -> int:
        return self.n + packed_size(self.n) + len(self.z_triples)

    def x(self, i: int) -> int:
        return i

    def X(self, i: int, j: int) -> int:
        return self.n + SymIndex(i, j).offset

    def z(self, triple) -> int:
        return self.n + packed_size(self.n) + self.z_triples.index(tuple(triple))

    def names(self) -> list[str]:
        names = [f"x{i}" for i in range(self.n)]
        for off in range(packed_size(self.n)):
            s = SymIndex.from_offset(off)
            names.append(f"X{s.i}{s.j}")
        names += [f"z{t[0]}{t[1]}{t[2]}" for t in self.z_triples]
        return names

    def point(self, primal: np.ndarray) -> MomentPoint:
        n = self.n
        x = primal[:n].copy()
        X = np.zeros((n, n))
        for off in range(packed_size(n)):
            s = SymIndex.from_offset(off)
            X[s.i, s.j] = X[s.j, s.i] = primal[n + off]
        z = {t: float(primal[self.z(t)]) for t in self.z_triples}
        return MomentPoint(x=x, X=X, z=z)


@dataclass
class ConicProgram:
    """Linear + PSD + rotated-SOC program over a flat variable vector.

    ``ineq_rows`` are affine forms constrained >= 0; ``eq_rows`` == 0;
    ``psd_blocks`` are square grids of affine entries required PSD;
    ``rsoc_rows`` are (u, v, w) with (u)^2 <= (v)(w), v >= 0, w >= 0.
    """

    vmap: VariableMap
    objective: Affine
    sense: str = "max"
    ineq_rows: list[Affine] = field(default_factory=list)
    eq_rows: list[Affine] = field(default_factory=list)
    psd_blocks: list[list[list[Affine]]] = field(default_factory=list)
    rsoc_rows: list[tuple[Affine, Affine, Affine]] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return self.vmap.num_vars

    def with_objective(self, objective: Affine, sense: str) -> "ConicProgram":
        out = replace(self)
        out.objective = objective
        out.sense = sense
        return out


def cut_affine(cut: LinearCut, vmap: VariableMap) -> Affine:
    i, j, k = cut.triple
    d: dict[int, float] = {}

    def add(idx, v):
        if v:
            d[idx] = d.get(idx, 0.0) + v

    for pos, gi in enumerate((i, j, k)):
        add(vmap.x(gi), cut.c[pos])
        add(vmap.X(gi, gi), cut.cdiag[pos])
    for slot, (a, b) in enumerate(PAIR_SLOTS):
        gg = (i, j, k)
        add(vmap.X(gg[a], gg[b]), cut.coff[slot])
    return (d, float(cut.b))


def _vec11_affine(vec, triple, vmap: VariableMap) -> Affine:
    i, j, k = triple
    d: dict[int, float] = {}

    def add(idx, v):
        if v:
            d[idx] = d.get(idx, 0.0) + v

    gg = (i, j, k)
    for pos in range(3):
        add(vmap.x(gg[pos]), vec[pos])
        add(vmap.X(gg[pos], gg[pos]), vec[3 + pos])
    for slot, (a, b) in enumerate(PAIR_SLOTS):
        add(vmap.X(gg[a], gg[b]), vec[6 + slot])
    if vec[_Z]:
        add(vmap.z(triple), vec[_Z])
    return (d, float(vec[_CONST]))


def moment_psd_block(vmap: VariableMap) -> list[list[Affine]]:
    n = vmap.n
    block = [[({}, 1.0) if (r == 0 and s == 0) else None
              for s in range(n + 1)] for r in range(n + 1)]
    for i in range(n):
        block[0][i + 1] = block[i + 1][0] = ({vmap.x(i): 1.0}, 0.0)
        for j in range(n):
            block[i + 1][j + 1] = ({vmap.X(i, j): 1.0}, 0.0)
    return block


def objective_affine(inst: BoxQpInstance, vmap: VariableMap) -> Affine:
    d: dict[int, float] = {}
    n = inst.n
    for i in range(n):
        if inst.q[i]:
            d[vmap.x(i)] = float(inst.q[i])
        for j in range(i, n):
            coef = inst.Q[i, j] if i == j else 2.0 * inst.Q[i, j]
            if coef:
                d[vmap.X(i, j)] = d.get(vmap.X(i, j), 0.0) + float(coef)
    return (d, 0.0)


def all_triples(n: int) -> list[tuple[int, int, int]]:
    return list(itertools.combinations(range(n), 3))


def build_relaxation(inst: BoxQpInstance, level: RelaxationLevel,
                     active_cuts: list[LinearCut] = (),
                     blocks: list[TrilinearBlock] = ()) -> ConicProgram:
    """Assemble the conic relaxation of an instance.

    Family flags on ``level`` enumerate cuts over all pairs/triples;
    ``active_cuts`` adds individually separated cuts; each trilinear
    block contributes its z variable, hull rows and SOC caps while
    displacing the plain RLT/TRI rows it implies on its own triple.
    """
    n = inst.n
    blocks = list(blocks)
    for blk in blocks:
        if max(blk.triple) >= n:
            raise ValueError(f"block triple {blk.triple} out of range for n={n}")
    vmap = VariableMap(n, tuple(b.triple for b in blocks))
    prog = ConicProgram(vmap=vmap, objective=objective_affine(inst, vmap),
                        sense="max")
    prog.psd_blocks.append(moment_psd_block(vmap))

    blocked_triples = {b.triple for b in blocks}
    blocked_pairs = {pair for t in blocked_triples
                     for pair in itertools.combinations(t, 2)}

    seen_rows: set[tuple] = set()

    def add_row(aff: Affine):
        key = (tuple(sorted(aff[0].items())), round(aff[1], 12))
        if key not in seen_rows:
            seen_rows.add(key)
            prog.ineq_rows.append(aff)

    def add_cut(cut: LinearCut):
        add_row(cut_affine(cut, vmap))

    # diagonal constraints X_aa <= x_a (lower diagonal bounds are
    # PSD-implied and omitted)
    if level.diag or level.rlt:
        for a in range(n):
            add_row(({vmap.x(a): 1.0, vmap.X(a, a): -1.0}, 0.0))
    if level.rlt:
        for i, j in itertools.combinations(range(n), 2):
            if (i, j) in blocked_pairs:
                continue
            xi, xj, Xij = vmap.x(i), vmap.x(j), vmap.X(i, j)
            add_row(({xi: 1.0, Xij: -1.0}, 0.0))
            add_row(({xj: 1.0, Xij: -1.0}, 0.0))
            add_row(({Xij: 1.0}, 0.0))
            add_row(({xi: -1.0, xj: -1.0, Xij: 1.0}, 1.0))
    families = [f for f in level.cut_families() if f not in ("DIAG", "RLT")]
    if families and n >= 3:
        for triple in all_triples(n):
            for fam in families:
                if fam == "TRI" and triple in blocked_triples:
                    continue
                for cut in canonical_family(fam):
                    add_cut(cut.on_triple(triple))
    for cut in active_cuts:
        if cut.family == "TRI" and cut.triple in blocked_triples:
            continue
        add_cut(cut)

    for blk in blocks:
        for vec in trilinear_linear_rows():
            add_row(_vec11_affine(vec, blk.triple, vmap))
        for (u, v, w) in blk.soc_terms:
            prog.rsoc_rows.append((_vec11_affine(u, blk.triple, vmap),
                                   _vec11_affine(v, blk.triple, vmap),
                                   _vec11_affine(w, blk.triple, vmap)))
    return prog


# ---------------------------------------------------------------------------
# z-interval analysis used to trigger trilinear blocks
# ---------------------------------------------------------------------------


def _eval_vec11(vec, p: MomentPoint, triple) -> tuple[float, float]:
    """Value split as (z-free part, z coefficient) at a moment point."""
    i, j, k = triple
    gg = (i, j, k)
    val = vec[_CONST]
    for pos in range(3):
        val += vec[pos] * p.x[gg[pos]]
        val += vec[3 + pos] * p.X[gg[pos], gg[pos]]
    for slot, (a, b) in enumerate(PAIR_SLOTS):
        val += vec[6 + slot] * p.X[gg[a], gg[b]]
    return val, vec[_Z]


def soc_z_interval(p: MomentPoint, triple,
                   soc_terms=None) -> tuple[float, float]:
    """Feasible z-interval [L, U] for a triple at a moment point.

    L collects the hull linear lower bounds; U the linear upper bounds
    together with every enabled SOC cap.  A cap whose product argument
    is negative admits no z and contributes a -inf upper bound.
    """
    if soc_terms is None:
        soc_terms = soc_cap_constraints()
    i, j, k = triple
    X12 = p.X[i, j]
    X13 = p.X[i, k]
    X23 = p.X[j, k]
    x1, x2, x3 = p.x[i], p.x[j], p.x[k]
    L = max(0.0, X12 + X13 - x1, X12 + X23 - x2, X13 + X23 - x3)
    U = min(X12, X13, X23, X12 + X13 + X23 + 1.0 - x1 - x2 - x3)
    for (u, v, w) in soc_terms:
        lo, hi = soc_cap_z_bounds(u, v, w, p, triple)
        L = max(L, lo)
        U = min(U, hi)
    return L, U


def soc_cap_z_bounds(u, v, w, p: MomentPoint, triple) -> tuple[float, float]:
    """Bounds on z implied by a single cap (u)^2 <= (v)(w) at a point."""
    vval, vz = _eval_vec11(v, p, triple)
    wval, wz = _eval_vec11(w, p, triple)
    if vz or wz:
        raise ValueError("cap product arguments must be z-free")
    alpha, sigma = _eval_vec11(u, p, triple)
    if sigma == 0:
        return (-math.inf, math.inf)
    # roundoff-level negative arguments are boundary cases, not violations
    if -1e-9 <= vval < 0.0:
        vval = 0.0
    if -1e-9 <= wval < 0.0:
        wval = 0.0
    if vval < 0.0 or wval < 0.0:
        # negative product argument: the cap excludes every z
        return (math.inf, -math.inf)
    r = math.sqrt(vval * wval)
    lo, hi = (-r - alpha) / sigma, (r - alpha) / sigma
    if sigma < 0:
        lo, hi = hi, lo
    return (lo, hi)
