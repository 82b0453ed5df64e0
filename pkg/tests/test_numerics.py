"""Kernel tests; expected values come from closed forms, independent
oracles (vertex enumeration for the LP, Monte Carlo for the noncentral
chi-square) or reconstruction identities."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import scipy.stats

from gridspike.numerics import (
    GaussianStream,
    LpProblem,
    chi2_cdf,
    chi2_quantile,
    noncentral_chi2_sf,
    solve_lp,
    solve_spd,
    sym_eig,
)


# ---------------------------------------------------------------------------
# symmetric eigendecomposition
# ---------------------------------------------------------------------------

class TestSymEig:
    def test_analytic_2x2(self):
        d = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(d.eigenvalues, [3.0, 1.0])
        r = 1 / np.sqrt(2)
        assert np.allclose(np.abs(d.eigenvectors[:, 0]), [r, r])
        assert np.allclose(np.abs(d.eigenvectors[:, 1]), [r, r])
        # paired correctly: A v = lambda v
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(a @ d.eigenvectors, d.eigenvectors * d.eigenvalues)

    def test_identity(self):
        d = sym_eig(np.eye(7))
        assert np.allclose(d.eigenvalues, 1.0)

    def test_reconstruction_random_psd(self):
        rng = np.random.default_rng(3)
        b = rng.standard_normal((20, 20))
        a = b @ b.T
        d = sym_eig(a)
        recon = d.eigenvectors @ np.diag(d.eigenvalues) @ d.eigenvectors.T
        assert np.max(np.abs(recon - a)) <= 1e-8 * np.max(np.abs(a))
        assert np.max(np.abs(d.eigenvectors.T @ d.eigenvectors - np.eye(20))) <= 1e-10

    def test_descending_order_and_sign_convention(self):
        rng = np.random.default_rng(11)
        b = rng.standard_normal((15, 15))
        d = sym_eig(b + b.T)
        assert np.all(np.diff(d.eigenvalues) <= 1e-12)
        for col in d.eigenvectors.T:
            assert col[np.argmax(np.abs(col))] >= 0.0

    def test_eigenvalue_sum_is_trace(self):
        rng = np.random.default_rng(5)
        b = rng.standard_normal((12, 12))
        a = b + b.T
        d = sym_eig(a)
        assert d.eigenvalues.sum() == pytest.approx(np.trace(a), rel=1e-8)

    def test_eigenvalue_product_is_determinant_3x3(self):
        rng = np.random.default_rng(6)
        b = rng.standard_normal((3, 3))
        a = b + b.T
        d = sym_eig(a)
        assert np.prod(d.eigenvalues) == pytest.approx(np.linalg.det(a), rel=1e-6)

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


# ---------------------------------------------------------------------------
# chi-square distribution functions
# ---------------------------------------------------------------------------

class TestChi2:
    def test_median_df2_is_2ln2(self):
        assert chi2_quantile(0.5, 2) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_quantile_inverts_cdf(self):
        # df=41, q=0.98: cross-checked by numerical integration of the density
        x = chi2_quantile(0.98, 41)
        assert chi2_cdf(x, 41) == pytest.approx(0.98, abs=1e-9)
        grid = np.linspace(1e-9, x, 400001)
        density = scipy.stats.chi2.pdf(grid, 41)
        integral = np.trapezoid(density, grid)
        assert integral == pytest.approx(0.98, abs=1e-6)

    def test_small_q_monotone_to_zero(self):
        values = [chi2_quantile(q, 5) for q in (1e-3, 1e-6, 1e-9)]
        assert values[0] > values[1] > values[2] > 0.0

    def test_cdf_monotone_in_x(self):
        rng = np.random.default_rng(0)
        for df in (1, 3, 10, 41):
            xs = np.sort(rng.uniform(0, 5 * df, 50))
            cdfs = [chi2_cdf(x, df) for x in xs]
            assert np.all(np.diff(cdfs) >= 0.0)

    def test_rejects_bad_q(self):
        for q in (0.0, 1.0, -0.5, 1.5):
            with pytest.raises(ValueError):
                chi2_quantile(q, 3)


class TestNoncentralChi2:
    def test_zero_noncentrality_reduces_to_central(self):
        for x in (0.5, 3.0, 60.0):
            assert noncentral_chi2_sf(x, 41, 0.0) == pytest.approx(
                1.0 - chi2_cdf(x, 41), abs=1e-12
            )

    def test_at_zero_is_one(self):
        assert noncentral_chi2_sf(0.0, 7, 3.0) == 1.0

    def test_against_monte_carlo_oracle(self):
        # oracle: sum of squared shifted Gaussians, shift nu on one coordinate
        df, nu, x = 41, 10.0, 60.0
        rng = np.random.default_rng(12345)
        total = 0
        n = 1_000_000
        chunk = 200_000
        for _ in range(n // chunk):
            g = rng.standard_normal((chunk, df))
            g[:, 0] += math.sqrt(nu)
            total += int(np.sum(np.einsum("ij,ij->i", g, g) >= x))
        mc = total / n
        assert noncentral_chi2_sf(x, df, nu) == pytest.approx(mc, abs=2e-3)

    def test_against_scipy(self):
        for df, nu, x in [(5, 1.0, 3.0), (41, 20.0, 62.0), (41, 160.0, 62.0), (373, 30.0, 430.0)]:
            assert noncentral_chi2_sf(x, df, nu) == pytest.approx(
                scipy.stats.ncx2.sf(x, df, nu), abs=1e-9
            )

    def test_mean_identity(self):
        # sampling mean of the implied distribution is df + nu
        rng = np.random.default_rng(9)
        for df, nu in [(10, 5.0), (100, 50.0)]:
            g = rng.standard_normal((200_000, df))
            g[:, 0] += math.sqrt(nu)
            mean = float(np.mean(np.einsum("ij,ij->i", g, g)))
            assert mean == pytest.approx(df + nu, rel=0.01)

    def test_monotone_in_nu(self):
        values = [noncentral_chi2_sf(50.0, 41, nu) for nu in (0.0, 5.0, 20.0, 100.0)]
        assert np.all(np.diff(values) > 0.0)


# ---------------------------------------------------------------------------
# linear programming
# ---------------------------------------------------------------------------

def brute_force_lp(problem: LpProblem):
    """Vertex-enumeration oracle: try every basis subset of the columns."""
    m, n = problem.a.shape
    best = None
    for cols in itertools.combinations(range(n), m):
        sub = problem.a[:, cols]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x_basis = np.linalg.solve(sub, problem.b)
        if np.any(x_basis < -1e-9):
            continue
        x = np.zeros(n)
        x[list(cols)] = x_basis
        value = float(problem.c @ x)
        if best is None or value < best:
            best = value
    return best


class TestSolveLp:
    def test_degenerate_optimum(self):
        r = solve_lp(LpProblem(c=[1.0, 1.0], a=[[1.0, 1.0]], b=[1.0]))
        assert r.optimal and r.objective == pytest.approx(1.0, abs=1e-12)

    def test_simple_equality(self):
        r = solve_lp(LpProblem(c=[1.0, 0.0], a=[[1.0, -1.0]], b=[1.0]))
        assert r.optimal
        assert np.allclose(r.x, [1.0, 0.0], atol=1e-10)
        assert r.objective == pytest.approx(1.0, abs=1e-10)

    def test_unbounded(self):
        r = solve_lp(LpProblem(c=[-1.0, 0.0], a=[[1.0, -1.0]], b=[1.0]))
        assert r.status == "unbounded"

    def test_infeasible(self):
        r = solve_lp(LpProblem(c=[1.0], a=[[1.0], [1.0]], b=[1.0, 2.0]))
        assert r.status == "infeasible"

    def test_matches_vertex_enumeration_on_random_instances(self):
        rng = np.random.default_rng(77)
        solved = 0
        for _ in range(40):
            a = rng.standard_normal((3, 5))
            x_feas = rng.uniform(0.1, 1.0, 5)
            b = a @ x_feas  # feasible by construction
            c = rng.standard_normal(5)
            problem = LpProblem(c=c, a=a, b=b)
            r = solve_lp(problem)
            oracle = brute_force_lp(problem)
            if r.status == "unbounded":
                continue
            assert r.optimal
            assert r.objective == pytest.approx(oracle, abs=1e-8)
            solved += 1
        assert solved >= 10

    def test_never_beaten_by_any_vertex(self):
        rng = np.random.default_rng(123)
        for _ in range(20):
            a = rng.standard_normal((4, 8))
            b = a @ rng.uniform(0.1, 1.0, 8)
            c = np.abs(rng.standard_normal(8))  # bounded below: x >= 0, c >= 0
            problem = LpProblem(c=c, a=a, b=b)
            r = solve_lp(problem)
            assert r.optimal
            oracle = brute_force_lp(problem)
            assert r.objective <= oracle + 1e-8

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((4, 9))
        b = a @ rng.uniform(0.1, 1.0, 9)
        c = rng.standard_normal(9)
        r1 = solve_lp(LpProblem(c=c, a=a, b=b))
        r2 = solve_lp(LpProblem(c=c, a=a, b=b))
        if r1.optimal:
            assert np.array_equal(r1.x, r2.x)
        assert r1.status == r2.status

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="dimensions"):
            LpProblem(c=[1.0, 2.0], a=[[1.0]], b=[1.0])


# ---------------------------------------------------------------------------
# SPD solve
# ---------------------------------------------------------------------------

class TestSolveSpd:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.allclose(solve_spd(np.eye(3), b), b)

    def test_diagonal(self):
        assert np.allclose(solve_spd(np.diag([2.0, 4.0]), np.array([2.0, 8.0])), [1.0, 2.0])

    def test_residual_on_random_spd(self):
        rng = np.random.default_rng(21)
        b_mat = rng.standard_normal((13, 13))
        a = b_mat @ b_mat.T + 13 * np.eye(13)
        rhs = rng.standard_normal(13)
        x = solve_spd(a, rhs)
        assert np.linalg.norm(a @ x - rhs) <= 1e-8 * np.linalg.norm(rhs)

    def test_non_spd_detected(self):
        from gridspike.numerics import NumericsError

        with pytest.raises(NumericsError):
            solve_spd(np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([1.0, 1.0]))


# ---------------------------------------------------------------------------
# seeded Gaussian stream
# ---------------------------------------------------------------------------

class TestGaussianStream:
    def test_same_seed_identical(self):
        a = GaussianStream(42).standard_normal(1000)
        b = GaussianStream(42).standard_normal(1000)
        assert np.array_equal(a, b)

    def test_distinct_seeds_differ_quickly(self):
        a = GaussianStream(1).standard_normal(10)
        b = GaussianStream(2).standard_normal(10)
        assert not np.allclose(a, b)

    def test_clt_bound_on_mean(self):
        draws = GaussianStream(7).standard_normal(1_000_000)
        assert abs(draws.mean()) < 0.005  # 5 sigma of 1/sqrt(1e6)
        assert draws.var() == pytest.approx(1.0, abs=0.01)

    def test_derived_streams_independent_of_sibling_count(self):
        first = GaussianStream(9).derive(0).standard_normal(5)
        again = GaussianStream(9).derive(0).standard_normal(5)
        other = GaussianStream(9).derive(1).standard_normal(5)
        assert np.array_equal(first, again)
        assert not np.allclose(first, other)

    def test_derivation_does_not_consume_parent(self):
        parent = GaussianStream(3)
        _ = parent.derive(0)
        a = parent.standard_normal(4)
        b = GaussianStream(3).standard_normal(4)
        assert np.array_equal(a, b)
