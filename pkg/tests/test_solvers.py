import math

import numpy as np
import pytest
from scipy.optimize import linprog

from hdinfer.errors import (
    ConvergenceError,
    RankDeficiencyError,
    ResidualCollapseError,
    ValidationError,
)
from hdinfer.numerics import ols_solve
from hdinfer.rng import RngState
from hdinfer.solvers import (
    BasisPursuitOptions,
    SolverOptions,
    basis_pursuit,
    cv_lambda,
    lasso_cd,
    lasso_lambda_max,
    soft_threshold,
    sqrt_lasso,
    sqrt_lasso_lambda_max,
)

TIGHT = SolverOptions(tol=1e-12, kkt_tol=1e-10, max_sweeps=200_000)


def bp_linprog_oracle(x, f):
    """Independent LP oracle: min 1'(u+v) s.t. X(u-v) = f, u, v >= 0."""
    n, p = x.shape
    res = linprog(c=np.ones(2 * p), A_eq=np.hstack([x, -x]), b_eq=f,
                  bounds=[(0, None)] * (2 * p), method="highs")
    assert res.status == 0
    return res.x[:p] - res.x[p:]


# ---------------------------------------------------------------------------
# soft threshold
# ---------------------------------------------------------------------------

def test_soft_threshold_values():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert np.array_equal(soft_threshold(np.array([3.0, -0.5, -3.0]), 1.0),
                          np.array([2.0, 0.0, -2.0]))
    with pytest.raises(ValidationError):
        soft_threshold(1.0, -0.1)


# ---------------------------------------------------------------------------
# Lasso
# ---------------------------------------------------------------------------

def test_lasso_zero_above_lambda_max(nprng):
    x = nprng.standard_normal((40, 12))
    y = nprng.standard_normal(40)
    lam_max = lasso_lambda_max(x, y)
    for lam in (lam_max, 1.01 * lam_max, 10 * lam_max):
        sol = lasso_cd(x, y, lam)
        assert np.array_equal(sol.beta, np.zeros(12))
        assert np.array_equal(sol.residuals, y)


def test_lasso_at_zero_penalty_matches_ols(nprng):
    x = nprng.standard_normal((50, 5))
    y = x @ np.array([1.0, -2.0, 0.5, 0.0, 3.0]) + nprng.standard_normal(50)
    sol = lasso_cd(x, y, 0.0, TIGHT)
    assert np.abs(sol.beta - ols_solve(x, y)).max() < 1e-8


def test_lasso_orthonormal_closed_form(nprng):
    n, p = 20, 5
    q, _ = np.linalg.qr(nprng.standard_normal((n, p)))
    x = q * math.sqrt(n)          # X'X/n = I
    y = nprng.standard_normal(n)
    lam = 0.7
    sol = lasso_cd(x, y, lam, TIGHT)
    closed = soft_threshold(x.T @ y / n, lam / 2.0)
    assert np.abs(sol.beta - closed).max() < 1e-8


def test_lasso_kkt_certificate_200_random_instances(nprng):
    for _ in range(200):
        n = int(nprng.integers(20, 101))
        p = int(nprng.integers(5, 201))
        x = nprng.standard_normal((n, p))
        y = nprng.standard_normal(n)
        lam = lasso_lambda_max(x, y) * 10 ** nprng.uniform(-1.5, 0.0)
        sol = lasso_cd(x, y, lam)
        assert sol.kkt_gap <= 1e-6


def test_lasso_objective_trace_non_increasing(nprng):
    opts = SolverOptions(record_objective=True)
    for _ in range(10):
        x = nprng.standard_normal((40, 30))
        y = nprng.standard_normal(40)
        lam = 0.3 * lasso_lambda_max(x, y)
        sol = lasso_cd(x, y, lam, opts)
        trace = np.array(sol.objective_trace)
        assert trace.size >= 1
        assert np.all(np.diff(trace) <= 1e-10 * (1.0 + abs(trace[0])))


def test_lasso_response_scaling_covariance(nprng):
    x = nprng.standard_normal((60, 25))
    y = nprng.standard_normal(60)
    lam = 0.4 * lasso_lambda_max(x, y)
    c = 3.0
    base = lasso_cd(x, y, lam, TIGHT)
    scaled = lasso_cd(x, c * y, c * lam, TIGHT)
    assert np.abs(scaled.beta - c * base.beta).max() <= 1e-10


def test_lasso_deterministic_bitwise(nprng):
    x = nprng.standard_normal((30, 40))
    y = nprng.standard_normal(30)
    a = lasso_cd(x, y, 0.2)
    b = lasso_cd(x, y, 0.2)
    assert np.array_equal(a.beta, b.beta)
    assert a.kkt_gap == b.kkt_gap and a.iterations == b.iterations


def test_lasso_residuals_exact_identity(nprng):
    x = nprng.standard_normal((25, 10))
    y = nprng.standard_normal(25)
    sol = lasso_cd(x, y, 0.1)
    assert np.array_equal(sol.residuals, y - x @ sol.beta)


def test_lasso_rejects_constant_column(nprng):
    x = nprng.standard_normal((20, 3))
    x[:, 1] = 2.5
    with pytest.raises(ValidationError):
        lasso_cd(x, nprng.standard_normal(20), 0.1)
    x[:, 1] = 0.0
    with pytest.raises(ValidationError):
        lasso_cd(x, nprng.standard_normal(20), 0.1)


def test_lasso_non_convergence_carries_gap(nprng):
    x = nprng.standard_normal((30, 50))
    y = nprng.standard_normal(30)
    with pytest.raises(ConvergenceError) as err:
        lasso_cd(x, y, 0.05, SolverOptions(max_sweeps=2))
    assert "kkt_gap" in err.value.gaps


def test_lasso_rejects_bad_lambda(nprng):
    x = nprng.standard_normal((10, 2))
    with pytest.raises(ValidationError):
        lasso_cd(x, nprng.standard_normal(10), -0.1)


# ---------------------------------------------------------------------------
# Square-root Lasso
# ---------------------------------------------------------------------------

def test_sqrt_lasso_zero_solution_threshold(nprng):
    x = nprng.standard_normal((50, 8))
    y = nprng.standard_normal(50)
    lam_max = sqrt_lasso_lambda_max(x, y)
    sol = sqrt_lasso(x, y, 1.001 * lam_max)
    assert np.array_equal(sol.beta, np.zeros(8))
    assert sol.sigma_hat == pytest.approx(np.linalg.norm(y) / math.sqrt(50), rel=1e-12)


def test_sqrt_lasso_single_column_support(nprng):
    # For y exactly in the span of column 0 the square-root objective is
    # piecewise linear in the 1-D coefficient: above the threshold
    # ||x_0|| / sqrt(n) the solution is 0 (support trivially inside {0}),
    # below it the minimizer interpolates, which must be signaled.
    n = 60
    x = nprng.standard_normal((n, 6))
    y = 1.7 * x[:, 0]
    threshold = sqrt_lasso_lambda_max(x, y)

    sol = sqrt_lasso(x, y, 1.05 * threshold)
    assert set(np.flatnonzero(sol.beta)) <= {0}
    grid = np.linspace(0.0, 2.5, 20001)
    lam = 1.05 * threshold
    vals = [np.linalg.norm(y - b * x[:, 0]) / math.sqrt(n) + lam * abs(b) for b in grid]
    assert grid[int(np.argmin(vals))] == 0.0  # oracle agrees the fit is zero

    with pytest.raises(ResidualCollapseError):
        sqrt_lasso(x, y, 0.5 * threshold)

    # Near-span variant: a little noise keeps the residual positive, the
    # support stays on column 0, and the fitted coefficient solves the
    # 1-D restriction (checked against the same grid oracle).
    y2 = 1.7 * x[:, 0] + 0.02 * nprng.standard_normal(n)
    lam2 = 0.4 * sqrt_lasso_lambda_max(x, y2)
    sol2 = sqrt_lasso(x, y2, lam2)
    assert set(np.flatnonzero(sol2.beta)) == {0}
    vals2 = [np.linalg.norm(y2 - b * x[:, 0]) / math.sqrt(n) + lam2 * abs(b)
             for b in grid]
    best2 = grid[int(np.argmin(vals2))]
    assert abs(sol2.beta[0] - best2) < 2e-3


def test_sqrt_lasso_fixed_point_matches_lasso(nprng):
    x = nprng.standard_normal((100, 20))
    y = x[:, 0] * 2.0 - x[:, 3] + nprng.standard_normal(100)
    lam = 0.3 * sqrt_lasso_lambda_max(x, y)
    sol = sqrt_lasso(x, y, lam)
    inner = lasso_cd(x, y, 2.0 * lam * sol.sigma_hat)
    assert np.abs(sol.beta - inner.beta).max() < 1e-6


def test_sqrt_lasso_kkt_certificates(nprng):
    for _ in range(20):
        n = int(nprng.integers(30, 101))
        p = int(nprng.integers(5, 60))
        x = nprng.standard_normal((n, p))
        y = nprng.standard_normal(n)
        lam = math.sqrt(math.log(p) / n) * 10 ** nprng.uniform(-0.3, 0.2)
        sol = sqrt_lasso(x, y, lam)
        assert sol.kkt_gap <= 1e-6


def test_sqrt_lasso_interpolation_error():
    # square system, lambda ~ 0: the fit can drive the residual to zero
    rng = np.random.default_rng(5)
    x = rng.standard_normal((6, 6))
    y = rng.standard_normal(6)
    with pytest.raises((ResidualCollapseError, ConvergenceError)):
        sqrt_lasso(x, y, 1e-8)


def test_sqrt_lasso_rejects_zero_response(nprng):
    x = nprng.standard_normal((10, 3))
    with pytest.raises(ValidationError):
        sqrt_lasso(x, np.zeros(10), 0.1)


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

def test_cv_deterministic(nprng):
    x = nprng.standard_normal((60, 15))
    y = nprng.standard_normal(60)
    a = cv_lambda(x, y, RngState(3), folds=5, grid_size=40)
    b = cv_lambda(x, y, RngState(3), folds=5, grid_size=40)
    assert np.array_equal(a.grid, b.grid)
    assert np.array_equal(a.cv_mean, b.cv_mean)
    assert a.selected == b.selected


def test_cv_grid_shape_and_monotonicity(nprng):
    x = nprng.standard_normal((40, 8))
    y = nprng.standard_normal(40)
    path = cv_lambda(x, y, RngState(0), folds=4, grid_size=25)
    assert path.grid.shape == (25,)
    assert np.all(np.diff(path.grid) < 0)
    assert path.grid[-1] == pytest.approx(path.grid[0] * 1e-3, rel=1e-9)
    assert 0 <= path.selected < 25


def test_cv_noiseless_recovery(nprng):
    n, p = 100, 10
    x = nprng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[4] = 2.0
    y = x @ beta
    path = cv_lambda(x, y, RngState(1), folds=5, grid_size=60)
    refit = lasso_cd(*_standardized(x, y), path.selected_lambda)
    assert 4 in set(np.flatnonzero(refit.beta))


def _standardized(x, y):
    from hdinfer.solvers import standardize
    xs, yc, _, _, _ = standardize(x, y)
    return xs, yc


def test_cv_pure_noise_prefers_large_lambda():
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        x = rng.standard_normal((100, 10))
        y = rng.standard_normal(100)
        path = cv_lambda(x, y, RngState(seed), folds=5, grid_size=100)
        if path.selected_lambda >= path.grid[0] / 4.0:
            hits += 1
    assert hits > 25  # majority criterion


def test_cv_rejects_bad_folds(nprng):
    x = nprng.standard_normal((6, 3))
    y = nprng.standard_normal(6)
    with pytest.raises(ValidationError):
        cv_lambda(x, y, RngState(0), folds=7)
    with pytest.raises(ValidationError):
        cv_lambda(x, y, RngState(0), folds=1)


# ---------------------------------------------------------------------------
# Basis pursuit
# ---------------------------------------------------------------------------

def test_bp_square_system_unique_point(nprng):
    x = nprng.standard_normal((8, 8))
    f = nprng.standard_normal(8)
    sol = basis_pursuit(x, f)
    assert np.abs(sol.beta - np.linalg.solve(x, f)).max() < 1e-8
    assert sol.feasibility_gap <= 1e-6


def test_bp_1x2_enumeration():
    # Feasible basic points of [1 2] beta = 2 are (2, 0) and (0, 1);
    # the second has the smaller l1 norm.
    sol = basis_pursuit(np.array([[1.0, 2.0]]), np.array([2.0]))
    assert np.abs(sol.beta - np.array([0.0, 1.0])).max() < 1e-6
    assert sol.l1_norm == pytest.approx(1.0, abs=1e-6)


def test_bp_compressed_sensing_recovery_with_lp_oracle(nprng):
    x = nprng.standard_normal((20, 60))
    beta_star = np.zeros(60)
    beta_star[[3, 17, 41]] = [1.0, -1.0, 1.0]
    f = x @ beta_star
    sol = basis_pursuit(x, f)
    assert np.abs(sol.beta - beta_star).max() < 1e-4
    oracle = bp_linprog_oracle(x, f)
    assert np.abs(sol.beta - oracle).max() < 1e-4


def test_bp_feasibility_and_l1_bound_random_instances(nprng):
    for _ in range(20):
        n = int(nprng.integers(5, 31))
        p = int(nprng.integers(n, 81))
        x = nprng.standard_normal((n, p))
        f = nprng.standard_normal(n)
        sol = basis_pursuit(x, f)
        assert sol.feasibility_gap <= 1e-6
        min_norm = x.T @ np.linalg.solve(x @ x.T, f)
        assert np.abs(x @ min_norm - f).max() < 1e-8
        assert sol.l1_norm <= np.abs(min_norm).sum() + 1e-8


def test_bp_shape_and_rank_errors(nprng):
    with pytest.raises(ValidationError):
        basis_pursuit(nprng.standard_normal((3, 2)), np.ones(3))
    x = np.vstack([np.ones(5), np.ones(5)])  # rank 1, n = 2
    with pytest.raises(RankDeficiencyError):
        basis_pursuit(x, np.ones(2))


def test_bp_iteration_cap_reports_gaps(nprng):
    x = nprng.standard_normal((10, 30))
    f = nprng.standard_normal(10)
    with pytest.raises(ConvergenceError) as err:
        basis_pursuit(x, f, BasisPursuitOptions(max_iter=3, polish=False))
    assert "feasibility_gap" in err.value.gaps


def test_bp_deterministic(nprng):
    x = nprng.standard_normal((10, 25))
    f = nprng.standard_normal(10)
    a = basis_pursuit(x, f)
    b = basis_pursuit(x, f)
    assert np.array_equal(a.beta, b.beta)
    assert a.iterations == b.iterations
