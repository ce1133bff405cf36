"""Linear valid inequalities on index triples and their switching algebra.

Every cut is an affine inequality

    sum_a c_a x_a + sum_a Cdiag_a X_aa + sum_{a<b} Coff_ab X_ab + b >= 0

supported on a triple (i, j, k).  The RLT (McCormick), TRI (triangle)
and the three extended-triangle families ETRI1/2/3 all live in this
representation.  The extended families are generated from a single base
constraint each by the 48-element group of variable switchings
(x_a -> 1 - x_a) combined with index permutations; the full coefficient
catalogs are also embedded verbatim as golden data for verification.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import MomentPoint

# order of off-diagonal coefficients within a triple
PAIR_SLOTS = ((0, 1), (0, 2), (1, 2))

FAMILIES = ("DIAG", "RLT", "TRI", "ETRI1", "ETRI2", "ETRI3")


@dataclass(frozen=True)
class LinearCut:
    """An affine inequality over (x_i, x_j, x_k, X entries) on a triple.

    ``c`` multiplies (x_i, x_j, x_k), ``cdiag`` multiplies
    (X_ii, X_jj, X_kk), ``coff`` multiplies (X_ij, X_ik, X_jk) and ``b``
    is the constant; the encoded inequality is LHS + b >= 0.
    """

    triple: tuple[int, int, int]
    c: tuple[float, float, float]
    cdiag: tuple[float, float, float]
    coff: tuple[float, float, float]
    b: float
    family: str
    tag: str = ""

    def __post_init__(self):
        i, j, k = self.triple
        if not (i < j < k):
            raise ValueError(f"triple must be strictly increasing, got {self.triple}")

    def coefficients(self) -> tuple[float, ...]:
        """The 9 variable coefficients followed by the constant."""
        return (*self.c, *self.cdiag, *self.coff, self.b)

    def on_triple(self, triple: tuple[int, int, int]) -> "LinearCut":
        """The same canonical cut re-indexed onto another triple."""
        return LinearCut(tuple(triple), self.c, self.cdiag, self.coff, self.b,
                         self.family, self.tag)


@dataclass(frozen=True)
class SwitchPattern:
    """A switching subset combined with a position permutation.

    ``switched`` is the set of triple positions where x is replaced by
    1 - x; ``perm`` sends old position p to new position perm[p].  The
    8 x 6 = 48 patterns form a group under ``then``.
    """

    switched: frozenset[int] = frozenset()
    perm: tuple[int, int, int] = (0, 1, 2)

    def then(self, other: "SwitchPattern") -> "SwitchPattern":
        """Pattern equivalent to applying self first, then other."""
        inv = [0, 0, 0]
        for p in range(3):
            inv[self.perm[p]] = p
        switched = self.switched ^ frozenset(inv[s] for s in other.switched)
        perm = tuple(other.perm[self.perm[p]] for p in range(3))
        return SwitchPattern(switched, perm)

    @staticmethod
    def all_patterns() -> list["SwitchPattern"]:
        subsets = itertools.chain.from_iterable(
            itertools.combinations(range(3), k) for k in range(4))
        return [SwitchPattern(frozenset(s), p)
                for s in subsets for p in itertools.permutations(range(3))]

    def describe(self) -> str:
        bits = "".join("1" if a in self.switched else "0" for a in range(3))
        return f"s{bits}p{''.join(map(str, self.perm))}"


def apply_switch(cut: LinearCut, pattern: SwitchPattern) -> LinearCut:
    """Substitute x_a -> 1 - x_a for switched positions, then permute.

    The substitution induces X_aa -> 1 - 2 x_a + X_aa, X_ab -> x_b - X_ab
    when only a is switched, and X_ab -> X_ab + 1 - x_a - x_b when both
    are switched.  Integer coefficients stay integer.
    """
    S = pattern.switched
    c = list(cut.c)
    d = list(cut.cdiag)
    f = list(cut.coff)
    b = cut.b
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
    perm = pattern.perm
    c2, d2, f2 = [0.0] * 3, [0.0] * 3, [0.0] * 3
    for p in range(3):
        c2[perm[p]] = c[p]
        d2[perm[p]] = d[p]
    for slot, (i, j) in enumerate(PAIR_SLOTS):
        f2[PAIR_SLOTS.index(tuple(sorted((perm[i], perm[j]))))] = f[slot]
    tag = f"{cut.tag}|{pattern.describe()}" if cut.tag else pattern.describe()
    return LinearCut(cut.triple, tuple(c2), tuple(d2), tuple(f2), b,
                     cut.family, tag)


def _primitive(values) -> tuple[int, ...]:
    ints = [int(round(v)) for v in values]
    if any(abs(v - r) > 1e-9 for v, r in zip(values, ints)):
        raise ValueError("expected integer coefficients")
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    g = max(g, 1)
    return tuple(v // g for v in ints)


def cut_key(cut: LinearCut) -> tuple[int, ...]:
    """Primitive integer tuple identifying a cut up to positive scaling."""
    return _primitive(cut.coefficients())


# base constraints of the three extended-triangle families (canonical
# triple, coefficient order x1 x2 x3 / X11 X22 X33 / X12 X13 X23 / b)
ETRI1_BASE = LinearCut((0, 1, 2), (2, 0, 0), (1, 0, 0), (-2, -2, 1), 0, "ETRI1", "base")
ETRI2_BASE = LinearCut((0, 1, 2), (4, 0, 0), (4, 0, 0), (-4, -4, 1), 0, "ETRI2", "base")
ETRI3_BASE = LinearCut((0, 1, 2), (4, 0, 0), (4, 1, 0), (-8, -4, 3), 0, "ETRI3", "base")

_FAMILY_BASES = {"ETRI1": ETRI1_BASE, "ETRI2": ETRI2_BASE, "ETRI3": ETRI3_BASE}


def _diag_cuts() -> list[LinearCut]:
    cuts = []
    for a in range(3):
        c = [0.0] * 3
        d = [0.0] * 3
        c[a] = 1.0
        d[a] = -1.0
        cuts.append(LinearCut((0, 1, 2), tuple(c), tuple(d), (0, 0, 0), 0,
                              "DIAG", f"diag{a}"))
    return cuts


def _rlt_cuts() -> list[LinearCut]:
    """DIAG plus the four McCormick inequalities for each pair."""
    cuts = _diag_cuts()
    for slot, (i, j) in enumerate(PAIR_SLOTS):
        def vec(cx, cf, b, name):
            c = [0.0] * 3
            f = [0.0] * 3
            for a, v in cx:
                c[a] = v
            f[slot] = cf
            return LinearCut((0, 1, 2), tuple(c), (0, 0, 0), tuple(f), b,
                             "RLT", f"{name}{i}{j}")
        cuts.append(vec([(i, 1.0)], -1.0, 0, "ub_i"))        # x_i - X_ij >= 0
        cuts.append(vec([(j, 1.0)], -1.0, 0, "ub_j"))        # x_j - X_ij >= 0
        cuts.append(vec([], 1.0, 0, "lb0_"))                 # X_ij >= 0
        cuts.append(vec([(i, -1.0), (j, -1.0)], 1.0, 1, "lb1_"))  # X_ij - x_i - x_j + 1 >= 0
    return cuts


def _tri_cuts() -> list[LinearCut]:
    cuts = []
    for i in range(3):
        j, k = (p for p in range(3) if p != i)
        c = [0.0] * 3
        f = [0.0] * 3
        c[i] = 1.0
        f[PAIR_SLOTS.index((j, k))] = 1.0
        f[PAIR_SLOTS.index(tuple(sorted((i, j))))] = -1.0
        f[PAIR_SLOTS.index(tuple(sorted((i, k))))] = -1.0
        cuts.append(LinearCut((0, 1, 2), tuple(c), (0, 0, 0), tuple(f), 0,
                              "TRI", f"tri{i}"))
    cuts.append(LinearCut((0, 1, 2), (-1, -1, -1), (0, 0, 0), (1, 1, 1), 1,
                          "TRI", "tri_sum"))
    return cuts


@lru_cache(maxsize=None)
def canonical_family(family: str) -> tuple[LinearCut, ...]:
    """The full deduplicated family on the canonical triple (0, 1, 2).

    Extended families are produced by applying all 48 switch patterns to
    the family base; duplicates coincide as primitive integer tuples.
    """
    if family == "DIAG":
        return tuple(_diag_cuts())
    if family == "RLT":
        return tuple(_rlt_cuts())
    if family == "TRI":
        return tuple(_tri_cuts())
    base = _FAMILY_BASES.get(family)
    if base is None:
        raise ValueError(f"unknown family {family!r}")
    seen: dict[tuple[int, ...], LinearCut] = {}
    for pattern in SwitchPattern.all_patterns():
        cand = apply_switch(base, pattern)
        seen.setdefault(cut_key(cand), cand)
    return tuple(sorted(seen.values(), key=cut_key))


def generate_family(family: str, triple: tuple[int, int, int]) -> list[LinearCut]:
    """The full family re-indexed onto an arbitrary triple i < j < k."""
    i, j, k = triple
    if not (0 <= i < j < k):
        raise ValueError(f"triple must satisfy i < j < k, got {triple}")
    return [cut.on_triple(triple) for cut in canonical_family(family)]


def evaluate_cut(cut: LinearCut, p: MomentPoint) -> float:
    """LHS value at a moment point; negative means violated by |value|."""
    i, j, k = cut.triple
    x = p.x
    X = p.X
    return float(
        cut.c[0] * x[i] + cut.c[1] * x[j] + cut.c[2] * x[k]
        + cut.cdiag[0] * X[i, i] + cut.cdiag[1] * X[j, j] + cut.cdiag[2] * X[k, k]
        + cut.coff[0] * X[i, j] + cut.coff[1] * X[i, k] + cut.coff[2] * X[j, k]
        + cut.b)


def evaluate_cut_batch(cut: LinearCut, x3: np.ndarray, X6: np.ndarray) -> np.ndarray:
    """Vectorized LHS over sample columns.

    ``x3`` is (3, m) of triple coordinates, ``X6`` is (6, m) ordered
    (X_ii, X_jj, X_kk, X_ij, X_ik, X_jk).
    """
    coef = np.array([*cut.c, *cut.cdiag, *cut.coff])
    return coef[:3] @ x3 + coef[3:] @ X6 + cut.b


def coefficient_norm(cut: LinearCut) -> float:
    """Euclidean norm of the 9 variable coefficients (excluding b)."""
    v = np.array([*cut.c, *cut.cdiag, *cut.coff])
    return float(np.linalg.norm(v))


def verify_validity_by_sampling(cut: LinearCut, samples: int = 100_000,
                                seed: int = 0) -> float:
    """Minimum LHS over rank-one lifts of uniform box samples.

    Uses a seeded 64-bit generator; the 8 box vertices are always
    included exactly.  Valid cuts return >= -1e-12.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    xs = rng.random((3, samples))
    verts = np.array(list(itertools.product((0.0, 1.0), repeat=3))).T
    xs = np.hstack([xs, verts])
    X6 = np.vstack([xs * xs, xs[0] * xs[1], xs[0] * xs[2], xs[1] * xs[2]])
    # evaluate in canonical position regardless of the cut's triple
    canon = cut.on_triple((0, 1, 2))
    return float(evaluate_cut_batch(canon, xs, X6).min())


# ---------------------------------------------------------------------------
# Golden coefficient catalogs (column order x1 x2 x3 X11 X22 X33 X12 X13 X23 b)
# ---------------------------------------------------------------------------

CATALOG_HEADER = "x1 x2 x3 X11 X22 X33 X12 X13 X23 b"

ETRI1_CATALOG_TEXT = """\
2 0 0 1 0 0 -2 -2 1 0
0 1 0 1 0 0 -2 2 -1 0
0 0 1 1 0 0 2 -2 -1 0
-2 -1 -1 1 0 0 2 2 1 1
-4 -2 -2 1 0 0 2 2 1 3
-2 -1 2 1 0 0 2 -2 -1 1
-2 2 -1 1 0 0 -2 2 -1 1
0 1 1 1 0 0 -2 -2 1 0
0 2 0 0 1 0 -2 1 -2 0
1 0 0 0 1 0 -2 -1 2 0
-2 -4 -2 0 1 0 2 1 2 3
-1 -2 2 0 1 0 2 -1 -2 1
0 0 1 0 1 0 2 -1 -2 0
-1 -2 -1 0 1 0 2 1 2 1
2 -2 -1 0 1 0 -2 -1 2 1
1 0 1 0 1 0 -2 1 -2 0
0 0 2 0 0 1 1 -2 -2 0
-2 -2 -4 0 0 1 1 2 2 3
1 0 0 0 0 1 -1 -2 2 0
-1 2 -2 0 0 1 -1 2 -2 1
0 1 0 0 0 1 -1 2 -2 0
2 -1 -2 0 0 1 -1 -2 2 1
-1 -1 -2 0 0 1 1 2 2 1
1 1 0 0 0 1 1 -2 -2 0
"""

ETRI2_CATALOG_TEXT = """\
4 0 0 4 0 0 -4 -4 1 0
0 1 0 4 0 0 -4 4 -1 0
0 0 1 4 0 0 4 -4 -1 0
-4 -1 -1 4 0 0 4 4 1 1
-12 -4 -4 4 0 0 4 4 1 8
-8 -3 4 4 0 0 4 -4 -1 4
-8 4 -3 4 0 0 -4 4 -1 4
-4 3 3 4 0 0 -4 -4 1 1
0 4 0 0 4 0 -4 1 -4 0
1 0 0 0 4 0 -4 -1 4 0
-4 -12 -4 0 4 0 4 1 4 8
-3 -8 4 0 4 0 4 -1 -4 4
0 0 1 0 4 0 4 -1 -4 0
-1 -4 -1 0 4 0 4 1 4 1
4 -8 -3 0 4 0 -4 -1 4 4
3 -4 3 0 4 0 -4 1 -4 1
0 0 4 0 0 4 1 -4 -4 0
-4 -4 -12 0 0 4 1 4 4 8
1 0 0 0 0 4 -1 -4 4 0
-3 4 -8 0 0 4 -1 4 -4 4
0 1 0 0 0 4 -1 4 -4 0
4 -3 -8 0 0 4 -1 -4 4 4
-1 -1 -4 0 0 4 1 4 4 1
3 3 -4 0 0 4 1 -4 -4 1
"""

ETRI3_CATALOG_TEXT = """\
4 0 0 4 1 0 -8 -4 3 0
0 3 0 4 1 0 -8 4 -3 0
-4 -2 3 4 1 0 8 -4 -3 1
-8 -5 -3 4 1 0 8 4 3 4
-12 -8 -4 4 1 0 8 4 3 8
-8 -5 4 4 1 0 8 -4 -3 4
-4 6 -1 4 1 0 -8 4 -3 1
0 3 1 4 1 0 -8 -4 3 0
4 0 0 4 0 1 -4 -8 3 0
-4 3 -2 4 0 1 -4 8 -3 1
0 0 3 4 0 1 4 -8 -3 0
-8 -3 -5 4 0 1 4 8 3 4
-12 -4 -8 4 0 1 4 8 3 8
-4 -1 6 4 0 1 4 -8 -3 1
-8 4 -5 4 0 1 -4 8 -3 4
0 1 3 4 0 1 -4 -8 3 0
0 4 0 1 4 0 -8 3 -4 0
3 0 0 1 4 0 -8 -3 4 0
-8 -12 -4 1 4 0 8 3 4 8
-5 -8 4 1 4 0 8 -3 -4 4
-2 -4 3 1 4 0 8 -3 -4 1
-5 -8 -3 1 4 0 8 3 4 4
6 -4 -1 1 4 0 -8 -3 4 1
3 0 1 1 4 0 -8 3 -4 0
0 4 0 0 4 1 -4 3 -8 0
3 -4 -2 0 4 1 -4 -3 8 1
-4 -12 -8 0 4 1 4 3 8 8
-1 -4 6 0 4 1 4 -3 -8 1
0 0 3 0 4 1 4 -3 -8 0
-3 -8 -5 0 4 1 4 3 8 4
4 -8 -5 0 4 1 -4 -3 8 4
1 0 3 0 4 1 -4 3 -8 0
0 0 4 1 0 4 3 -8 -4 0
-8 -4 -12 1 0 4 3 8 4 8
3 0 0 1 0 4 -3 -8 4 0
-5 4 -8 1 0 4 -3 8 -4 4
-2 3 -4 1 0 4 -3 8 -4 1
6 -1 -4 1 0 4 -3 -8 4 1
-5 -3 -8 1 0 4 3 8 4 4
3 1 0 1 0 4 3 -8 -4 0
0 0 4 0 1 4 3 -4 -8 0
-4 -8 -12 0 1 4 3 4 8 8
3 -2 -4 0 1 4 -3 -4 8 1
-1 6 -4 0 1 4 -3 4 -8 1
0 3 0 0 1 4 -3 4 -8 0
4 -5 -8 0 1 4 -3 -4 8 4
-3 -5 -8 0 1 4 3 4 8 4
1 3 0 0 1 4 3 -4 -8 0
"""

_CATALOG_TEXT = {"ETRI1": ETRI1_CATALOG_TEXT, "ETRI2": ETRI2_CATALOG_TEXT,
                 "ETRI3": ETRI3_CATALOG_TEXT}


def catalog_rows(family: str) -> list[tuple[int, ...]]:
    """Golden coefficient rows for an extended family, as integer tuples."""
    text = _CATALOG_TEXT.get(family)
    if text is None:
        raise ValueError(f"no golden catalog for family {family!r}")
    return [tuple(int(t) for t in line.split()) for line in text.strip().splitlines()]


def catalog_cuts(family: str) -> list[LinearCut]:
    out = []
    for idx, row in enumerate(catalog_rows(family)):
        out.append(LinearCut((0, 1, 2), row[0:3], row[3:6], row[6:9], row[9],
                             family, f"cat{idx}"))
    return out


def export_catalog(family: str) -> str:
    """Plain-text table of the generated family, one cut per line, in the
    golden column order, for diffing."""
    lines = [CATALOG_HEADER]
    for cut in canonical_family(family):
        lines.append(" ".join(str(int(round(v))) for v in cut.coefficients()))
    return "\n".join(lines) + "\n"


def verify_catalogs() -> dict[str, bool]:
    """Check generated families against the golden rows as integer sets."""
    out = {}
    for family in ("ETRI1", "ETRI2", "ETRI3"):
        generated = {cut_key(c) for c in canonical_family(family)}
        golden = {_primitive(r) for r in catalog_rows(family)}
        out[family] = generated == golden
    return out
