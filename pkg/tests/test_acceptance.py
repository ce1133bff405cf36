"""End-to-end acceptance checks against the published reference values.

Each criterion is one class.  Reference numbers are hard-coded at the
stated tolerances; solver-backed checks share the session backend.  Two
checks in criterion 6 are marked strict-xfail: the property as stated
does not hold for the polyhedral extreme sets (counterexamples are given
in the docstrings), and the tests document that honestly rather than
weakening the assertion.
"""

import itertools
import time

import numpy as np
import pytest

from boxqp import bench, driver, exact, oracle
from boxqp.backend import CvxpyBackend
from boxqp.conic import (RelaxationLevel, soc_cap_constraints)
from boxqp.cuts import (ETRI1_BASE, ETRI2_BASE, ETRI3_BASE, SwitchPattern,
                        apply_switch, canonical_family, catalog_cuts,
                        coefficient_norm, evaluate_cut, evaluate_cut_batch,
                        verify_catalogs)
from boxqp.exact import all_extreme_points
from boxqp.model import MomentPoint, feasible_value


class TestCriterion1BlLadder:
    """BL relaxation-value ladder, each value within 1e-4."""

    def test_ladder_values(self, backend):
        ladder = bench.bl_ladder(backend)
        expect = {"psd+rlt+tri": 1.09291, "+etri1": 1.06613,
                  "+etri1/2/3": 1.05882, "+soc": 1.00000}
        for name, value in expect.items():
            assert ladder[name] == pytest.approx(value, abs=1e-4), name


class TestCriterion2Table1:
    """Maximum-violation grid for RLT/TRI/ETRI1 over three levels."""

    # (level, family, normalized) -> value; zeros are dominated cells
    EXPECT = {
        ("psd+diag", "RLT", False): 0.1250,
        ("psd+diag", "TRI", False): 0.1250,
        ("psd+diag", "ETRI1", False): 0.1250,
        ("psd+rlt", "RLT", False): 0.0,
        ("psd+rlt", "TRI", False): 0.1250,
        ("psd+rlt", "ETRI1", False): 0.1111,
        ("psd+rlt+tri", "RLT", False): 0.0,
        ("psd+rlt+tri", "TRI", False): 0.0,
        ("psd+rlt+tri", "ETRI1", False): 0.0625,
        ("psd+diag", "RLT", True): 0.1250,
        ("psd+diag", "TRI", True): 0.0625,
        ("psd+diag", "ETRI1", True): 0.0377,
        ("psd+rlt", "RLT", True): 0.0,
        ("psd+rlt", "TRI", True): 0.0625,
        ("psd+rlt", "ETRI1", True): 0.0335,
        ("psd+rlt+tri", "RLT", True): 0.0,
        ("psd+rlt+tri", "TRI", True): 0.0,
        ("psd+rlt+tri", "ETRI1", True): 0.0188,
    }

    def test_all_cells(self, backend):
        grid = exact.table1_grid(backend)
        for key, value in self.EXPECT.items():
            assert grid[key] == pytest.approx(value, abs=1e-3), key


class TestCriterion3Table2:
    """Maximum-violation grid for ETRI2/ETRI3 over four levels."""

    EXPECT = {
        ("psd+diag", "ETRI2", False): 0.3333,
        ("psd+diag", "ETRI3", False): 0.3333,
        ("psd+rlt", "ETRI2", False): 0.1111,
        ("psd+rlt", "ETRI3", False): 0.2038,
        ("psd+rlt+tri", "ETRI2", False): 0.1005,
        ("psd+rlt+tri", "ETRI3", False): 0.1005,
        ("psd+rlt+tri+etri1", "ETRI2", False): 0.0856,
        ("psd+rlt+tri+etri1", "ETRI3", False): 0.0856,
        ("psd+diag", "ETRI2", True): 0.0471,
        ("psd+diag", "ETRI3", True): 0.0311,
        ("psd+rlt", "ETRI2", True): 0.0157,
        ("psd+rlt", "ETRI3", True): 0.0190,
        ("psd+rlt+tri", "ETRI2", True): 0.0142,
        ("psd+rlt+tri", "ETRI3", True): 0.0094,
        ("psd+rlt+tri+etri1", "ETRI2", True): 0.0121,
        ("psd+rlt+tri+etri1", "ETRI3", True): 0.0080,
    }

    def test_all_cells(self, backend):
        grid = exact.table2_grid(backend)
        for key, value in self.EXPECT.items():
            assert grid[key] == pytest.approx(value, abs=1e-3), key


class TestCriterion4Catalogs:
    """Switching algebra regenerates the golden catalogs exactly."""

    def test_exact_row_sets(self):
        assert verify_catalogs() == {"ETRI1": True, "ETRI2": True,
                                     "ETRI3": True}
        assert len(canonical_family("ETRI1")) == 24
        assert len(canonical_family("ETRI2")) == 24
        assert len(canonical_family("ETRI3")) == 48

    def test_coefficient_norms(self):
        mins = {fam: min(round(coefficient_norm(c) ** 2)
                         for c in canonical_family(fam))
                for fam in ("ETRI1", "ETRI2", "ETRI3")}
        assert mins == {"ETRI1": 11, "ETRI2": 50, "ETRI3": 115}
        bases = {"ETRI1": ETRI1_BASE, "ETRI2": ETRI2_BASE,
                 "ETRI3": ETRI3_BASE}
        assert {f: round(coefficient_norm(b) ** 2)
                for f, b in bases.items()} \
            == {"ETRI1": 14, "ETRI2": 65, "ETRI3": 122}


class TestCriterion5OracleAgreement:
    """Disjunctive n = 3 solve and enumeration oracle agree to 1e-5 on
    100 seeded instances, in under a minute."""

    def test_agreement(self, backend, bl):
        start = time.monotonic()
        assert exact.solve_exact_qpb3(bl, backend) == pytest.approx(
            1.0, abs=1e-5)
        assert oracle.solve_global(bl).value == pytest.approx(1.0, abs=1e-5)
        for i in range(100):
            spec = bench.GenSpec(n=3, d=(50, 75, 90)[i % 3], number=i, seed=7)
            inst = bench.generate(spec)
            v_exact = exact.solve_exact_qpb3(inst, backend)
            v_oracle = oracle.solve_global(inst).value
            assert v_exact == pytest.approx(v_oracle, abs=1e-5), spec.label
        assert time.monotonic() - start < 60.0


class TestCriterion6ExtremePoints:
    """Cut behaviour on the lifted extreme matrices of the polyhedral
    outer sets P0 (60 matrices) and P1 (192 matrices)."""

    @pytest.mark.xfail(
        strict=True,
        reason="P0 extreme matrices are not box lifts and violate switched "
               "cuts; e.g. the cut (-4,-2,-2|1,0,0|2,2,1|3) evaluates to "
               "-1.0 at the P0 matrix lifted from (E14+E41)/2, which has "
               "x=(1/2,1/2,1/2) and X=0")
    def test_all_catalog_cuts_nonnegative_on_p0(self):
        worst = min(evaluate_cut(c, p)
                    for fam in ("ETRI1", "ETRI2", "ETRI3")
                    for c in catalog_cuts(fam)
                    for p in all_extreme_points("P0"))
        assert worst >= -1e-12

    @pytest.mark.xfail(
        strict=True,
        reason="P1 extreme matrices violate switched ETRI2/3 cuts; the "
               "worst ETRI2 value on the 192 lifted matrices is -0.875")
    def test_etri23_nonnegative_on_p1(self):
        worst = min(evaluate_cut(c, p)
                    for fam in ("ETRI2", "ETRI3")
                    for c in catalog_cuts(fam)
                    for p in all_extreme_points("P1"))
        assert worst >= -1e-12

    def test_each_etri1_tight_on_p0(self):
        points = all_extreme_points("P0")
        for cut in canonical_family("ETRI1"):
            tight = sum(1 for p in points
                        if abs(evaluate_cut(cut, p)) <= 1e-9)
            assert tight >= 2, cut.tag

    # companions: the properties that do hold on the extreme sets

    def test_each_etri23_tight_on_p1(self):
        points = all_extreme_points("P1")
        for fam, floor in (("ETRI2", 30), ("ETRI3", 20)):
            for cut in canonical_family(fam):
                tight = sum(1 for p in points
                            if abs(evaluate_cut(cut, p)) <= 1e-9)
                assert tight >= floor, (fam, cut.tag)

    def test_permutation_orbits_valid(self):
        """Unswitched permutation images of the bases are nonnegative on
        the extreme sets (ETRI1 on P0 and P1; ETRI2/3 on P1)."""
        def orbit(base):
            return [apply_switch(base, SwitchPattern(frozenset(), perm))
                    for perm in itertools.permutations(range(3))]

        p0 = all_extreme_points("P0")
        p1 = all_extreme_points("P1")
        for points in (p0, p1):
            for cut in orbit(ETRI1_BASE):
                assert min(evaluate_cut(cut, p) for p in points) >= -1e-12
        for base in (ETRI2_BASE, ETRI3_BASE):
            for cut in orbit(base):
                assert min(evaluate_cut(cut, p) for p in p1) >= -1e-12


class TestCriterion7LemmaFixtures:
    """Equality-point fixtures of the three base constraints: exact
    zeros on rank-one box lifts with the stated affine ranks."""

    FIXTURES = (
        (ETRI1_BASE, 5, [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0.5, 0),
                         (0, 0, 0.5), (1, 1, 1)]),
        (ETRI2_BASE, 5, [(0, 0, 0), (0, 1, 0), (0, 0, 1), (0, 0.5, 0),
                         (0, 0, 0.5), (0.5, 1, 1)]),
        (ETRI3_BASE, 4, [(0, 0, 0), (0, 0, 1), (0, 0, 0.5), (0.5, 1, 0),
                         (1, 1, 1)]),
    )

    def test_fixture_points(self):
        assert [len(pts) for _, _, pts in self.FIXTURES] == [6, 6, 5]
        for cut, rank, points in self.FIXTURES:
            lifts = []
            for xv in points:
                x = np.array(xv, dtype=float)
                assert np.all((0.0 <= x) & (x <= 1.0))
                p = MomentPoint.rank_one(x)
                assert abs(evaluate_cut(cut, p)) <= 1e-12, (cut.family, xv)
                lifts.append(np.concatenate([
                    x, [p.X[0, 0], p.X[1, 1], p.X[2, 2],
                        p.X[0, 1], p.X[0, 2], p.X[1, 2]]]))
            A = np.array(lifts)
            affine_rank = np.linalg.matrix_rank(A[1:] - A[0], tol=1e-10)
            assert affine_rank == rank, cut.family


def _sample_z_consistent(num, caps, seed, batch=40_000):
    """Moment samples on the canonical triple that admit a trilinear z
    under the hull linear system plus the given rotated-SOC caps.

    Returns (xs, X6) with xs of shape (3, num) and X6 rows ordered
    (X11, X22, X33, X12, X13, X23).  X diagonals are drawn between x^2
    and x, off-diagonals inside their McCormick boxes; a sample is kept
    when its z-interval (linear bounds intersected with every cap's
    implied bounds) is nonempty.
    """
    rng = np.random.default_rng(seed)
    xs_out, X6_out = [], []
    got = 0
    while got < num:
        x = rng.random((3, batch))
        t = rng.random((3, batch))
        Xd = x * x + t * (x - x * x)
        lo = [np.maximum(0.0, x[a] + x[b] - 1.0)
              for a, b in ((0, 1), (0, 2), (1, 2))]
        hi = [np.minimum(x[a], x[b]) for a, b in ((0, 1), (0, 2), (1, 2))]
        u = rng.random((3, batch))
        Xoff = [l + uu * (h - l) for l, h, uu in zip(lo, hi, u)]
        X12, X13, X23 = Xoff
        L = np.maximum.reduce([np.zeros(batch), X12 + X13 - x[0],
                               X12 + X23 - x[1], X13 + X23 - x[2]])
        U = np.minimum.reduce([X12, X13, X23,
                               X12 + X13 + X23 + 1.0 - x.sum(axis=0)])
        T = np.vstack([x, Xd, X12, X13, X23, np.zeros(batch),
                       np.ones(batch)])
        for (uv, vv, wv) in caps:
            uv, vv, wv = map(np.asarray, (uv, vv, wv))
            alpha = uv @ T
            sigma = uv[9]
            vval = vv @ T
            wval = wv @ T
            bad = (vval < -1e-12) | (wval < -1e-12)
            r = np.sqrt(np.clip(vval, 0.0, None) * np.clip(wval, 0.0, None))
            cap_lo = (-r - alpha) / sigma
            cap_hi = (r - alpha) / sigma
            if sigma < 0:
                cap_lo, cap_hi = cap_hi, cap_lo
            L = np.maximum(L, np.where(bad, np.inf, cap_lo))
            U = np.minimum(U, np.where(bad, -np.inf, cap_hi))
        keep = L <= U + 1e-12
        xs_out.append(x[:, keep])
        X6_out.append(T[3:9, keep])
        got += int(keep.sum())
    return np.hstack(xs_out)[:, :num], np.hstack(X6_out)[:, :num]


class TestCriterion8ImplicationProperty:
    """On 1e5 sampled moment points that admit a consistent trilinear z
    under the relevant caps, every implied linear family is valid."""

    def test_diag_caps_imply_etri12(self):
        caps = soc_cap_constraints(kinds=("diag",))
        xs, X6 = _sample_z_consistent(100_000, caps, seed=0)
        for fam in ("ETRI1", "ETRI2"):
            for cut in canonical_family(fam):
                assert evaluate_cut_batch(cut, xs, X6).min() >= -1e-9, \
                    (fam, cut.tag)

    def test_pair_caps_imply_etri3(self):
        caps = soc_cap_constraints(kinds=("pair",))
        xs, X6 = _sample_z_consistent(100_000, caps, seed=1)
        for cut in canonical_family("ETRI3"):
            assert evaluate_cut_batch(cut, xs, X6).min() >= -1e-9, cut.tag


class TestCriterion9DeterministicGaps:
    """Normalized-gap rows from the three deterministic unit objectives,
    plus the randomized search ladder relation."""

    def test_deterministic_rows(self, backend):
        art = bench.run_tables("t4", backend)
        gaps = [value for _, _, _, value in art.rows]
        assert gaps[0] == pytest.approx(0.1768, abs=1e-3)
        assert gaps[1] == pytest.approx(0.0625, abs=1e-3)
        assert gaps[2] == pytest.approx(0.0188, abs=1e-3)

    def test_search_ladder_relation(self, backend):
        # documented budget: 20 candidate objectives and 3 refinement
        # steps per level; stronger levels are searched first and their
        # incumbents re-evaluated at the weaker levels
        levels = ("psd+rlt", "psd+rlt+tri", "+etri1/2/3")
        out = bench.search_gap_ladder(levels, budget=20, seed=0,
                                      backend=backend, refine=3)
        for weak, strong in zip(levels, levels[1:]):
            assert out[strong] <= out[weak] + 1e-6, (weak, strong)
        # the first seeded candidate is a TRI direction, so the weakest
        # level must report at least its known gap
        assert out["psd+rlt"] >= 0.0625 - 1e-3
        assert all(v >= 0.0 for v in out.values())


@pytest.fixture(scope="module")
def suite_artifact(backend):
    return bench.run_suite(bench.default_suite(seed=0, count=50), backend)


class TestCriterion10GeneratedSuite:
    """Regenerated 50-instance benchmark: gap monotonicity, bound
    soundness, SOC closure and rank-one extraction."""

    def test_suite_size(self, suite_artifact):
        assert len(suite_artifact.suite_rows) == 50

    def test_monotone_gaps(self, suite_artifact):
        for row in suite_artifact.suite_rows:
            gaps = [row.gaps()[name] for name in bench.LADDER_LEVELS]
            for earlier, later in zip(gaps, gaps[1:]):
                assert later <= earlier + 1e-6, row.label

    def test_bounds_above_opt(self, suite_artifact):
        for row in suite_artifact.suite_rows:
            for name, value in row.values.items():
                assert value >= row.opt - 1e-6, (row.label, name)
            assert row.feasible <= row.opt + 1e-6, row.label

    def test_soc_closes_nontight_instances(self, suite_artifact):
        nontight = [row for row in suite_artifact.suite_rows
                    if row.gaps()["psd+rlt+tri"] > 1e-4]
        closed = [row for row in nontight if row.closed]
        # vacuously true when every instance is already tight at the
        # base level (the generated instances are all vertex-optimal)
        assert len(closed) * 2 >= len(nontight)

    def test_extraction_on_closed_instances(self, suite_artifact):
        for row in suite_artifact.suite_rows:
            if row.closed:
                assert row.extracted, row.label


class TestCriterion11DriverInvariants:
    """Deterministic round logs and added-cut permanence."""

    def test_log_determinism(self, bl, backend):
        level = RelaxationLevel.from_name("+soc")
        a = driver.run(bl, level, driver.DriverConfig(seed=3), backend)
        b = driver.run(bl, level, driver.DriverConfig(seed=3), backend)
        assert a.log_lines() == b.log_lines()
        assert a.final_value == b.final_value

    def test_added_cut_permanence(self, bl):
        class RecordingBackend(CvxpyBackend):
            def __init__(self):
                super().__init__()
                self.programs = []

            def solve(self, program):
                self.programs.append(program)
                return super().solve(program)

        recorder = RecordingBackend()
        level = RelaxationLevel.from_name("+etri1/2/3")
        report = driver.run(bl, level, driver.DriverConfig(extract=False),
                            recorder)
        assert len(report.rounds) >= 2
        # every separated cut stays in the model for all later rounds
        assert len(report.active_cuts) == sum(
            count for r in report.rounds for _, count in r.cuts_added)
        def row_keys(prog):
            return {(tuple(sorted(d.items())), round(c, 12))
                    for d, c in prog.ineq_rows}
        for earlier, later in zip(recorder.programs, recorder.programs[1:]):
            assert row_keys(earlier) <= row_keys(later)
