"""Penalized regression engines.

Coordinate-descent Lasso on the objective

    ||y - X beta||_2^2 / n + lambda ||beta||_1,

the square-root Lasso via the scaled-Lasso alternation, K-fold
cross-validated lambda selection, and basis pursuit (minimum l1 norm
subject to X beta = f) via ADMM with an exact affine projection.

The solvers work on the data exactly as given: no hidden centering or
rescaling happens here, so the KKT certificate attached to each solution
refers to the stated objective on the caller's arrays. Standardization
for user-facing pipelines lives in :mod:`hdinfer.inference`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    ConvergenceError,
    NotSpdError,
    RankDeficiencyError,
    ResidualCollapseError,
    ValidationError,
)
from .numerics import cholesky, ols_solve, solve_spd, spd_inverse
from .rng import RngState, permutation


@dataclass
class SolverOptions:
    """Tolerances shared by the iterative solvers.

    tol bounds the largest coefficient move in a converged sweep, kkt_tol
    the stationarity certificate. The square-root Lasso alternation stops
    once the relative change of sigma_hat drops below sigma_tol.
    """

    tol: float = 1e-7
    kkt_tol: float = 1e-6
    max_sweeps: int = 50_000
    sigma_tol: float = 1e-9
    max_alternations: int = 100
    record_objective: bool = False


@dataclass
class BasisPursuitOptions:
    tol: float = 1e-9          # primal and dual residual target
    max_iter: int = 200_000
    rho: float = 1.0           # fixed ADMM step, no residual balancing
    polish: bool = True        # attempt exact support polish + dual certificate


@dataclass
class LassoSolution:
    """Lasso fit with its optimality certificate.

    residuals is y - X beta exactly as fitted; kkt_gap is the largest
    violation of the stationarity conditions measured on those residuals.
    """

    beta: np.ndarray
    lam: float
    residuals: np.ndarray
    iterations: int
    kkt_gap: float
    objective: float
    objective_trace: list | None = None


@dataclass
class SqrtLassoSolution:
    beta: np.ndarray
    lam: float
    residuals: np.ndarray
    sigma_hat: float
    iterations: int
    kkt_gap: float


@dataclass
class LambdaPath:
    """Cross-validation record over a decreasing lambda grid."""

    grid: np.ndarray
    cv_mean: np.ndarray
    cv_se: np.ndarray
    selected: int

    @property
    def selected_lambda(self) -> float:
        return float(self.grid[self.selected])


@dataclass
class BasisPursuitSolution:
    beta: np.ndarray
    feasibility_gap: float
    l1_norm: float
    iterations: int


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0); works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValidationError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _check_design(x, y=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValidationError("design must be a 2-D matrix with n, p >= 1")
    if not np.isfinite(x).all():
        raise ValidationError("design entries must be finite")
    if y is None:
        return x
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != x.shape[0]:
        raise ValidationError("response must be a vector matching the design rows")
    if not np.isfinite(y).all():
        raise ValidationError("response entries must be finite")
    return x, y


def _check_no_constant_columns(x):
    spread = x.max(axis=0) - x.min(axis=0)
    flat = np.flatnonzero(spread == 0.0)
    if flat.size:
        raise ValidationError(f"zero-variance column {int(flat[0])}")


def standardize(x, y=None):
    """Center and scale columns to unit 1/n variance; center y.

    Returns (xs, x_means, x_scales) or (xs, yc, x_means, x_scales, y_mean).
    """
    x = np.asarray(x, dtype=float)
    means = x.mean(axis=0)
    centered = x - means
    scales = np.sqrt((centered ** 2).mean(axis=0))
    bad = np.flatnonzero(scales == 0.0)
    if bad.size:
        raise ValidationError(f"zero-variance column {int(bad[0])}")
    xs = centered / scales
    if y is None:
        return xs, means, scales
    y = np.asarray(y, dtype=float)
    y_mean = float(y.mean())
    return xs, y - y_mean, means, scales, y_mean


def _lasso_kkt_gap_raw(x, residuals, lam, beta):
    """Stationarity gap of the Lasso objective from stored residuals."""
    n = x.shape[0]
    grad = 2.0 * (x.T @ residuals) / n
    active = beta != 0.0
    gap_inactive = 0.0
    if (~active).any():
        gap_inactive = float(np.maximum(np.abs(grad[~active]) - lam, 0.0).max())
    gap_active = 0.0
    if active.any():
        gap_active = float(np.abs(grad[active] - lam * np.sign(beta[active])).max())
    return max(gap_inactive, gap_active)


# ---------------------------------------------------------------------------
# Lasso
# ---------------------------------------------------------------------------

def _gram_parts(x, y):
    n = x.shape[0]
    g = np.ascontiguousarray(x.T @ x / n)
    b = x.T @ y / n
    return g, b


def _solve_gram(g, b, lam, beta, order, opts):
    sweeps, gap, ok = _kernels.cd_solve(
        g, b, lam, beta, order,
        float(opts.tol), float(opts.kkt_tol), int(opts.max_sweeps))
    if not ok:
        raise ConvergenceError(
            f"coordinate descent did not converge in {sweeps} sweeps",
            kkt_gap=float(gap))
    return int(sweeps)


def lasso_cd(x, y, lam, opts: SolverOptions | None = None, beta0=None) -> LassoSolution:
    """Coordinate-descent Lasso for ||y - X b||^2/n + lam ||b||_1.

    Cyclic sweeps with an active-set phase; terminates only once the KKT
    stationarity gap is within opts.kkt_tol, so every returned solution
    carries a machine-checked certificate. Deterministic given inputs.
    """
    opts = opts or SolverOptions()
    x, y = _check_design(x, y)
    _check_no_constant_columns(x)
    lam = float(lam)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValidationError("lambda must be a nonnegative finite number")

    n, p = x.shape
    g, b = _gram_parts(x, y)
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float, copy=True)
    if beta.shape != (p,):
        raise ValidationError("warm start has wrong length")
    order = np.arange(p, dtype=np.int64)

    trace = None
    if opts.record_objective:
        trace = []
        yty_n = float(y @ y) / n
        v = g @ beta
        sweeps = 0
        while True:
            maxd = _kernels.cd_sweep(g, b, lam, beta, v, order)
            sweeps += 1
            v = g @ beta
            trace.append(yty_n - 2.0 * float(b @ beta) + float(beta @ v)
                         + lam * float(np.abs(beta).sum()))
            gap = _kernels.cd_kkt_gap(b, v, lam, beta, order)
            if maxd <= opts.tol and gap <= opts.kkt_tol:
                break
            if sweeps >= opts.max_sweeps:
                raise ConvergenceError(
                    f"coordinate descent did not converge in {sweeps} sweeps",
                    kkt_gap=float(gap))
    else:
        sweeps = _solve_gram(g, b, lam, beta, order, opts)

    residuals = y - x @ beta
    objective = float(residuals @ residuals) / n + lam * float(np.abs(beta).sum())
    return LassoSolution(
        beta=beta,
        lam=lam,
        residuals=residuals,
        iterations=sweeps,
        kkt_gap=_lasso_kkt_gap_raw(x, residuals, lam, beta),
        objective=objective,
        objective_trace=trace,
    )


def lasso_lambda_max(x, y) -> float:
    """Smallest lambda whose Lasso solution is identically zero."""
    x, y = _check_design(x, y)
    n = x.shape[0]
    return float(np.abs(2.0 * (x.T @ y) / n).max())


# ---------------------------------------------------------------------------
# Square-root Lasso (scaled-Lasso alternation)
# ---------------------------------------------------------------------------

def sqrt_lasso(x, y, lam, opts: SolverOptions | None = None, beta0=None) -> SqrtLassoSolution:
    """Square-root Lasso for ||y - X b||_2 / sqrt(n) + lam ||b||_1.

    Solved as the fixed point of the scaled-Lasso alternation: a Lasso fit
    at effective penalty 2 * lam * sigma_hat followed by the update
    sigma_hat = ||r||_2 / sqrt(n), repeated until sigma_hat stabilizes.
    """
    opts = opts or SolverOptions()
    x, y = _check_design(x, y)
    _check_no_constant_columns(x)
    lam = float(lam)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValidationError("lambda must be a nonnegative finite number")

    n, p = x.shape
    norm_y = float(np.linalg.norm(y))
    if norm_y == 0.0:
        raise ValidationError("response must not be identically zero")

    g, b = _gram_parts(x, y)
    gyy = float(y @ y) / n
    sigma = norm_y / math.sqrt(n)
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float, copy=True)
    order = np.arange(p, dtype=np.int64)

    total_sweeps = 0
    converged = False
    for _ in range(opts.max_alternations):
        inner = SolverOptions(tol=opts.tol, kkt_tol=max(opts.kkt_tol * sigma, 1e-14),
                              max_sweeps=opts.max_sweeps)
        total_sweeps += _solve_gram(g, b, 2.0 * lam * sigma, beta, order, inner)
        v = g @ beta
        rss_n = max(gyy - 2.0 * float(b @ beta) + float(beta @ v), 0.0)
        sigma_new = math.sqrt(rss_n)
        if sigma_new < 1e-10:
            raise ResidualCollapseError(
                "residual collapsed: the fit interpolates the response",
                sigma_hat=sigma_new)
        done = abs(sigma_new - sigma) <= opts.sigma_tol * sigma
        sigma = sigma_new
        if done:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"scaled-Lasso alternation did not stabilize in "
            f"{opts.max_alternations} rounds", sigma_hat=sigma)

    # One final solve at the settled penalty keeps beta and sigma consistent.
    inner = SolverOptions(tol=opts.tol, kkt_tol=max(opts.kkt_tol * sigma, 1e-14),
                          max_sweeps=opts.max_sweeps)
    total_sweeps += _solve_gram(g, b, 2.0 * lam * sigma, beta, order, inner)

    residuals = y - x @ beta
    sigma_hat = float(np.linalg.norm(residuals)) / math.sqrt(n)
    if sigma_hat < 1e-10:
        raise ResidualCollapseError(
            "residual collapsed: the fit interpolates the response",
            sigma_hat=sigma_hat)

    stat = (x.T @ residuals) / (math.sqrt(n) * math.sqrt(n) * sigma_hat)
    active = beta != 0.0
    gap_inactive = 0.0
    if (~active).any():
        gap_inactive = float(np.maximum(np.abs(stat[~active]) - lam, 0.0).max())
    gap_active = 0.0
    if active.any():
        gap_active = float(np.abs(stat[active] - lam * np.sign(beta[active])).max())

    return SqrtLassoSolution(
        beta=beta,
        lam=lam,
        residuals=residuals,
        sigma_hat=sigma_hat,
        iterations=total_sweeps,
        kkt_gap=max(gap_inactive, gap_active),
    )


def sqrt_lasso_lambda_max(x, y) -> float:
    """Smallest lambda whose square-root Lasso solution is zero."""
    x, y = _check_design(x, y)
    n = x.shape[0]
    return float(np.abs(x.T @ y).max() / (math.sqrt(n) * np.linalg.norm(y)))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------

def _lambda_grid(lam_max, grid_size):
    grid = np.exp(np.linspace(math.log(lam_max), math.log(lam_max * 1e-3), grid_size))
    grid[0] = lam_max
    return grid

# Path fits can run a little looser than certified solutions; selection is
# insensitive at these tolerances and the chosen lambda is refit tightly.
_CV_OPTS = SolverOptions(tol=1e-6, kkt_tol=1e-5, max_sweeps=500)


def _solve_gram_path(g, b, lam, beta, order, opts):
    """Best-effort path fit: capped sweeps, no convergence requirement.

    Deep in a lambda grid with p > n the minimizer is not unique and
    coefficients can wander along the solution set indefinitely; for CV
    error evaluation the capped iterate is as informative as a fully
    settled one.
    """
    _kernels.cd_solve(g, b, lam, beta, order,
                      float(opts.tol), float(opts.kkt_tol), int(opts.max_sweeps))


def cv_lambda(x, y, rng: RngState, folds: int = 10, grid_size: int = 100) -> LambdaPath:
    """K-fold cross-validation over a log-spaced lambda grid.

    The data is standardized internally (the returned grid refers to the
    standardized problem), the grid runs from lambda_max down to
    0.001 * lambda_max, and the selected index minimizes the mean CV error
    with ties broken toward the larger lambda. Fold assignment is a
    deterministic function of ``rng``.
    """
    x, y = _check_design(x, y)
    n, p = x.shape
    if folds < 2:
        raise ValidationError("cross-validation needs at least 2 folds")
    if n < folds:
        raise ValidationError(f"{n} rows cannot be split into {folds} folds")
    if grid_size < 2:
        raise ValidationError("grid_size must be >= 2")

    xs, yc, _, _, _ = standardize(x, y)
    lam_max = lasso_lambda_max(xs, yc)
    if lam_max <= 0.0:
        raise ValidationError("response is orthogonal to every column; "
                              "no lambda grid exists")
    grid = _lambda_grid(lam_max, grid_size)

    fold_of = np.empty(n, dtype=np.int64)
    fold_of[permutation(rng, n)] = np.arange(n) % folds

    errors = np.empty((folds, grid_size))
    order = np.arange(p, dtype=np.int64)
    for f in range(folds):
        val = fold_of == f
        xt, yt = xs[~val], yc[~val]
        xv, yv = xs[val], yc[val]
        nt = xt.shape[0]
        g = np.ascontiguousarray(xt.T @ xt / nt)
        b = xt.T @ yt / nt
        beta = np.zeros(p)
        # Once the training fit saturates (almost as many active
        # coefficients as training rows), smaller lambdas only slide along
        # a non-unique solution set; freeze the held-out error there.
        saturated = max(int(0.9 * nt), 2)
        frozen = None
        for i, lam in enumerate(grid):
            if frozen is not None:
                errors[f, i] = frozen
                continue
            _solve_gram_path(g, b, float(lam), beta, order, _CV_OPTS)
            resid = yv - xv @ beta
            errors[f, i] = float(resid @ resid) / resid.shape[0]
            if int((beta != 0.0).sum()) >= saturated:
                frozen = errors[f, i]

    cv_mean = errors.mean(axis=0)
    cv_se = errors.std(axis=0, ddof=1) / math.sqrt(folds)
    selected = int(np.argmin(cv_mean))  # first minimum, i.e. the larger lambda
    return LambdaPath(grid=grid, cv_mean=cv_mean, cv_se=cv_se, selected=selected)


def cv_lambda_sqrt(x, y, rng: RngState, folds: int = 10, grid_size: int = 100) -> LambdaPath:
    """K-fold CV for the square-root Lasso penalty, same conventions."""
    x, y = _check_design(x, y)
    n, p = x.shape
    if folds < 2:
        raise ValidationError("cross-validation needs at least 2 folds")
    if n < folds:
        raise ValidationError(f"{n} rows cannot be split into {folds} folds")

    xs, yc, _, _, _ = standardize(x, y)
    lam_max = sqrt_lasso_lambda_max(xs, yc)
    if lam_max <= 0.0:
        raise ValidationError("response is orthogonal to every column; "
                              "no lambda grid exists")
    grid = _lambda_grid(lam_max, grid_size)

    fold_of = np.empty(n, dtype=np.int64)
    fold_of[permutation(rng, n)] = np.arange(n) % folds

    errors = np.empty((folds, grid_size))
    for f in range(folds):
        val = fold_of == f
        xt, yt = xs[~val], yc[~val]
        xv, yv = xs[val], yc[val]
        nt = xt.shape[0]
        beta = np.zeros(p)
        saturated = max(int(0.9 * nt), 2)
        frozen = None
        for i, lam in enumerate(grid):
            if frozen is not None:
                errors[f, i] = frozen
                continue
            try:
                sol = sqrt_lasso(xt, yt, float(lam), _CV_OPTS, beta0=beta)
                beta = sol.beta
            except (ResidualCollapseError, ConvergenceError):
                # Deep in the grid the fit may interpolate; the error curve
                # has long turned up by then, so freeze the previous fit.
                frozen = errors[f, i - 1] if i else float(yv @ yv) / yv.shape[0]
                errors[f, i] = frozen
                continue
            resid = yv - xv @ beta
            errors[f, i] = float(resid @ resid) / resid.shape[0]
            if int((beta != 0.0).sum()) >= saturated:
                frozen = errors[f, i]

    cv_mean = errors.mean(axis=0)
    cv_se = errors.std(axis=0, ddof=1) / math.sqrt(folds)
    return LambdaPath(grid=grid, cv_mean=cv_mean, cv_se=cv_se,
                      selected=int(np.argmin(cv_mean)))


# ---------------------------------------------------------------------------
# Basis pursuit
# ---------------------------------------------------------------------------

def _bp_polish(x, f, support):
    """Exact-support solve plus dual certificate.

    Returns the polished coefficient vector if the support admits a feasible
    solution whose sign pattern is certified optimal by a dual vector, else
    None. Certified solutions have exact zeros off the support.
    """
    n, p = x.shape
    if support.size == 0 or support.size > n:
        return None
    xt = x[:, support]
    try:
        lt = cholesky(xt.T @ xt)
    except (NotSpdError, ValidationError):
        return None
    coef = solve_spd(lt, xt.T @ f)
    feas = float(np.abs(xt @ coef - f).max())
    if feas > 1e-9 * max(1.0, float(np.abs(f).max())):
        return None
    signs = np.sign(coef)
    if np.any(signs == 0.0):
        return None
    nu = xt @ solve_spd(lt, signs)
    if float(np.abs(x.T @ nu).max()) > 1.0 + 1e-7:
        return None
    beta = np.zeros(p)
    beta[support] = coef
    return beta


def basis_pursuit(x, f, opts: BasisPursuitOptions | None = None) -> BasisPursuitSolution:
    """Minimum-l1-norm solution of X beta = f for full-row-rank X, n <= p.

    ADMM alternating the exact affine projection
    w -> w - X'(XX')^{-1}(Xw - f) with soft thresholding, fixed step
    rho = 1. Once the iterates settle, the sparse iterate's support is
    polished by an exact least-squares solve and accepted only when a dual
    vector certifies optimality, which yields exact zeros off the support.
    """
    opts = opts or BasisPursuitOptions()
    x = _check_design(x)
    f = np.asarray(f, dtype=float)
    n, p = x.shape
    if f.shape != (n,):
        raise ValidationError("target vector must have one entry per design row")
    if not np.isfinite(f).all():
        raise ValidationError("target entries must be finite")
    if n > p:
        raise ValidationError("basis pursuit requires n <= p")

    try:
        lower = cholesky(x @ x.T)
    except NotSpdError as exc:
        raise RankDeficiencyError(
            f"design does not have full row rank (minor {exc.order} of XX')"
        ) from exc

    if n == p:
        # The constraint set is a single point.
        beta = ols_solve(x, f)
        gap = float(np.abs(x @ beta - f).max())
        return BasisPursuitSolution(beta=beta, feasibility_gap=gap,
                                    l1_norm=float(np.abs(beta).sum()), iterations=0)

    kernel = spd_inverse(lower)  # (XX')^{-1}, n x n
    rho = float(opts.rho)
    thr = 1.0 / rho
    z = x.T @ (kernel @ f)       # min-l2-norm feasible start
    u = np.zeros(p)

    polish_due = 0
    for it in range(1, opts.max_iter + 1):
        w = z - u
        beta = w - x.T @ (kernel @ (x @ w - f))
        z_old = z
        z = soft_threshold(beta + u, thr)
        u += beta - z
        r_prim = float(np.abs(beta - z).max())
        s_dual = float(rho * np.abs(z - z_old).max(initial=0.0))

        if opts.polish and r_prim <= 1e-3 and s_dual <= 1e-3 and it >= polish_due:
            # The certificate is sufficient on its own, so trying early is
            # safe: a wrong support fails the dual check and we keep going.
            polish_due = it + 50
            polished = _bp_polish(x, f, np.flatnonzero(z))
            if polished is not None:
                return BasisPursuitSolution(
                    beta=polished,
                    feasibility_gap=float(np.abs(x @ polished - f).max()),
                    l1_norm=float(np.abs(polished).sum()),
                    iterations=it)

        if r_prim <= opts.tol and s_dual <= opts.tol:
            gap = float(np.abs(x @ z - f).max())
            return BasisPursuitSolution(beta=z, feasibility_gap=gap,
                                        l1_norm=float(np.abs(z).sum()),
                                        iterations=it)

    gap = float(np.abs(x @ z - f).max())
    raise ConvergenceError(
        f"basis pursuit did not converge in {opts.max_iter} iterations",
        primal_residual=r_prim, dual_residual=s_dual, feasibility_gap=gap)
