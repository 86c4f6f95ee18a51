from itertools import combinations

import numpy as np
import pytest

from cpoint.simplex import (
    LpStatus,
    StandardLp,
    build_sharpe_lp,
    make_basis,
    parametric_rhs_range,
    phase1,
    simplex_solve,
    solve_lp,
)


def enumerate_vertices(lp):
    """Independent oracle: visit every basis by brute force."""
    best = np.inf
    best_x = None
    for cols in combinations(range(lp.n), lp.m):
        b = lp.a[:, cols]
        try:
            xb = np.linalg.solve(b, lp.d)
        except np.linalg.LinAlgError:
            continue
        if np.abs(np.linalg.det(b)) < 1e-10:
            continue
        if xb.min(initial=0.0) < -1e-9:
            continue
        val = float(lp.c[list(cols)] @ xb)
        if val < best:
            best = val
            best_x = (cols, xb)
    return best, best_x


def random_bounded_lp(rng, m=4, n=8):
    """Feasible LP whose polyhedron sits inside a scaled simplex."""
    a = rng.normal(size=(m, n))
    a[0] = 1.0  # normalization row bounds the polyhedron
    x0 = rng.uniform(0.1, 1.0, size=n)
    d = a @ x0
    c = rng.normal(size=n)
    return StandardLp(a, d, c)


class TestWorkedExample:
    def setup_method(self):
        self.lp = StandardLp(
            np.array([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0]]),
            np.array([1.0, 1.0]),
            np.array([-1.0, -1.0, 0.0, 0.0]),
        )

    def test_box_example(self):
        sol = simplex_solve(self.lp, make_basis(self.lp, [2, 3]))
        assert sol.status is LpStatus.OPTIMAL
        assert np.allclose(sol.x, [1.0, 1.0, 0.0, 0.0], atol=1e-12)
        assert sol.value == pytest.approx(-2.0, abs=1e-12)
        assert sol.iterations <= 3

    def test_duality_gap_tight(self):
        sol = simplex_solve(self.lp, make_basis(self.lp, [2, 3]))
        assert abs(sol.value - sol.duals @ self.lp.d) <= 1e-10

    def test_first_index_rule_same_answer(self):
        sol = simplex_solve(self.lp, make_basis(self.lp, [2, 3]), entering_rule="bland")
        assert sol.value == pytest.approx(-2.0, abs=1e-12)


def test_zero_cost_immediately_optimal():
    rng = np.random.default_rng(5)
    lp = random_bounded_lp(rng)
    lp = StandardLp(lp.a, lp.d, np.zeros(lp.n))
    p1 = phase1(lp)
    sol = simplex_solve(p1.lp, p1.basis)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.value == pytest.approx(0.0, abs=1e-12)
    assert sol.iterations == 0


class TestAgainstVertexEnumeration:
    def test_random_instances(self):
        rng = np.random.default_rng(42)
        checked = 0
        for _ in range(25):
            lp = random_bounded_lp(rng)
            best, _ = enumerate_vertices(lp)
            sol = solve_lp(lp)
            if sol.status is not LpStatus.OPTIMAL:
                continue
            assert sol.value == pytest.approx(best, abs=1e-8)
            checked += 1
        assert checked >= 20

    def test_weak_duality_and_slackness(self):
        rng = np.random.default_rng(43)
        for _ in range(15):
            lp = random_bounded_lp(rng)
            sol = solve_lp(lp)
            if sol.status is not LpStatus.OPTIMAL:
                continue
            gap = abs(sol.value - sol.duals @ lp.d)
            assert gap <= 1e-8 * (1 + abs(sol.value))
            w = lp.c - sol.duals @ lp.a
            slackness = float(np.sum(sol.x * np.maximum(w, 0.0)))
            assert slackness <= 1e-8


def test_unbounded_detected_with_ray():
    # min -x1 st x1 - x2 = 0: feasible ray (1,1) drives value down forever
    lp = StandardLp(np.array([[1.0, -1.0]]), np.array([0.0]), np.array([-1.0, 0.0]))
    p1 = phase1(lp)
    sol = simplex_solve(p1.lp, p1.basis)
    assert sol.status is LpStatus.UNBOUNDED
    ray = sol.ray
    assert ray is not None
    assert np.allclose(lp.a @ ray, 0.0, atol=1e-10)
    assert float(lp.c @ ray) < 0
    assert ray.min() >= -1e-12


class TestPhase1:
    def test_identity_columns_immediate(self):
        lp = StandardLp(
            np.array([[2.0, 1.0, 1.0, 0.0], [1.0, 3.0, 0.0, 1.0]]),
            np.array([4.0, 5.0]),
            np.array([1.0, 1.0, 0.0, 0.0]),
        )
        res = phase1(lp)
        assert res.status is LpStatus.OPTIMAL
        x = res.basis.full_vector(res.lp)
        assert x.min() >= -1e-9
        assert np.allclose(res.lp.a @ x, res.lp.d, atol=1e-9)

    def test_contradictory_rows_infeasible(self):
        lp = StandardLp(
            np.array([[1.0, 0.0], [1.0, 0.0]]),
            np.array([1.0, 2.0]),
            np.array([0.0, 0.0]),
        )
        assert phase1(lp).status is LpStatus.INFEASIBLE

    def test_random_feasible_by_substitution(self):
        rng = np.random.default_rng(44)
        for _ in range(10):
            lp = random_bounded_lp(rng, m=3, n=7)
            res = phase1(lp)
            assert res.status is LpStatus.OPTIMAL
            x = res.basis.full_vector(res.lp)
            assert x.min() >= -1e-9
            assert np.abs(res.lp.a @ x - res.lp.d).max() <= 1e-8 * (1 + np.abs(lp.d).max())

    def test_redundant_row_dropped(self):
        # second row is twice the first: dependent but consistent
        lp = StandardLp(
            np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]),
            np.array([1.0, 2.0]),
            np.array([1.0, 2.0, 3.0]),
        )
        res = phase1(lp)
        assert res.status is LpStatus.OPTIMAL
        assert res.redundant_rows == [1]
        assert res.lp.m == 1
        sol = simplex_solve(res.lp, res.basis)
        assert sol.value == pytest.approx(1.0, abs=1e-9)


class TestParametricRange:
    def test_p_zero_unbounded_interval(self):
        lp = StandardLp(np.eye(2, 4), np.array([1.0, 1.0]), np.zeros(4))
        basis = make_basis(lp, [0, 1])
        r = parametric_rhs_range(lp, basis, lp.d, np.zeros(2))
        assert r.eta_lo == -np.inf and r.eta_hi == np.inf
        assert r.leaving_lo is None and r.leaving_hi is None

    def test_direct_ratio(self):
        lp = StandardLp(np.eye(2, 4), np.array([1.0, 1.0]), np.zeros(4))
        basis = make_basis(lp, [0, 1])
        r = parametric_rhs_range(lp, basis, np.array([1.0, 1.0]), np.array([-1.0, 0.0]))
        assert r.eta_hi == pytest.approx(1.0, abs=1e-12)
        assert r.leaving_hi == 0

    def test_interval_confirmed_on_grid(self):
        rng = np.random.default_rng(45)
        for _ in range(10):
            lp = random_bounded_lp(rng, m=3, n=6)
            res = phase1(lp)
            basis = res.basis
            lpr = res.lp
            t = lpr.d.copy()
            p = rng.normal(size=lpr.m)
            r = parametric_rhs_range(lpr, basis, t, p)
            assert r.eta_lo <= 0.0 <= r.eta_hi
            lo = max(r.eta_lo, -10.0)
            hi = min(r.eta_hi, 10.0)
            for eta in np.linspace(lo, hi, 7):
                xb = np.linalg.solve(lpr.a[:, basis.basic], t + eta * p)
                assert xb.min() >= -1e-7
            for eta, inside in [(r.eta_lo - 1e-3, False), (r.eta_hi + 1e-3, False)]:
                if not np.isfinite(eta):
                    continue
                xb = np.linalg.solve(lpr.a[:, basis.basic], t + eta * p)
                assert xb.min() < 1e-9


class FakeMoments:
    def __init__(self, names):
        self.names = names


class TestSharpeLp:
    def test_single_asset(self):
        lp = build_sharpe_lp(FakeMoments(["A"]), [0.3], [1.0], 0.05, 0.2, eta=2.0)
        sol = solve_lp(lp)
        assert np.allclose(sol.x, [1.0])

    def test_dominance_two_assets(self):
        lp = build_sharpe_lp(FakeMoments(["A", "B"]), [1.0, 2.0], [0.0, 0.0], 0.05, 0.2, eta=1.5)
        sol = solve_lp(lp)
        assert np.allclose(sol.x, [0.0, 1.0], atol=1e-10)

    def test_five_assets_vs_vertex_oracle(self):
        rng = np.random.default_rng(46)
        for _ in range(5):
            a = rng.normal(0.05, 0.04, size=5)
            b = rng.uniform(0.5, 1.5, size=5)
            lp = build_sharpe_lp(FakeMoments(list("ABCDE")), a, b, 0.03, 0.15, eta=2.0,
                                 diversification_cap=0.4)
            best, _ = enumerate_vertices(lp)
            sol = solve_lp(lp)
            assert sol.status is LpStatus.OPTIMAL
            assert sol.value == pytest.approx(best, abs=1e-9)

    def test_infeasible_cap_rejected(self):
        with pytest.raises(ValueError):
            build_sharpe_lp(FakeMoments(list("AB")), [0.1, 0.1], [1.0, 1.0], 0.0, 0.1,
                            eta=1.0, diversification_cap=0.3)


def test_objective_monotone_under_default_rule():
    # re-run the solver but record values through a wrapped cost lookup
    rng = np.random.default_rng(47)
    lp = random_bounded_lp(rng, m=4, n=9)
    p1 = phase1(lp)
    values = []
    basis = p1.basis
    lpr = p1.lp
    # step manually: one simplex_solve call per pivot is wasteful, so
    # instead check the final value never exceeds the start value and the
    # solve is optimal (fine-grained monotonicity is covered by the
    # IMPROVE_TOL machinery inside the solver)
    x0 = basis.full_vector(lpr)
    sol = simplex_solve(lpr, basis)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.value <= float(lpr.c @ x0) + 1e-9
