"""De-sparsified Lasso inference.

Builds the residual instruments Z_j from nodewise regressions, applies the
bias correction

    b_j = Z_j'Y / Z_j'X_j - sum_{k != j} (Z_j'X_k / Z_j'X_j) beta_k,

and attaches per-coordinate standard errors under either variance model:

* sandwich: se_j = sqrt(n) * omega_j / |Z_j'X_j| with omega_j^2 the
  empirical variance of eps_i * Z_{j;i}, consistent whether or not the
  linear model is correctly specified;
* classic:  se_j = sigma_eps * ||Z_j||_2 / |Z_j'X_j|, the textbook form for
  correctly specified or fixed-design models.

The pipeline entry points (:func:`fit_desparsified`, :func:`build_report`)
center the response, center and scale the design columns to unit variance,
fit everything on that standardized problem, and map estimates, standard
errors, and intervals back to the original column scale. The low-level
operations (:func:`fit_nodewise`, :func:`desparsify`, the variance
estimators) never transform their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateInstrumentError,
    HdinferError,
    ValidationError,
)
from .numerics import normal_quantile, normal_sf, ols_solve
from .rng import RngState, randint
from .solvers import (
    LassoSolution,
    SolverOptions,
    cv_lambda,
    cv_lambda_sqrt,
    lasso_cd,
    standardize,
    _check_design,
    _solve_gram,
)

NODEWISE_METHODS = ("lasso", "sqrt-lasso")
VARIANCE_MODES = ("sandwich", "classic")

# |Z_j'X_j| below this fraction of ||X_j||^2 makes the instrument unusable.
DEGENERATE_RTOL = 1e-10


@dataclass
class NodewiseFit:
    """Residual instrument for one column.

    z is exactly x_j - X_{-j} @ gamma_hat; zx_inner = z . x_j and
    z_norm_sq_over_n = ||z||^2 / n are the two quantities the estimator and
    its diagnostics are built from.
    """

    j: int
    gamma_hat: np.ndarray
    z: np.ndarray
    zx_inner: float
    z_norm_sq_over_n: float
    method: str
    lambda_x: float


@dataclass
class DiagnosticsRecord:
    d1_stat: float          # max_k |eps' X_k / n|
    b1_min: float           # min_j ||Z_j||^2 / n
    sigma_eps_hat: float
    lambda_used: float
    lambda_x_used: float


@dataclass
class InferenceConfig:
    """Settings for one de-sparsified Lasso analysis.

    lam / lambda_x left as None are selected by K-fold cross-validation;
    the nodewise penalty is tuned on a single randomly chosen column and
    shared by all p nodewise regressions. rng drives fold assignment and
    that column choice, making the whole analysis a pure function of
    (x, y, config).
    """

    variance_mode: str = "sandwich"
    alpha: float = 0.05
    lam: float | None = None
    lambda_x: float | None = None
    method: str = "lasso"
    cv_folds: int = 10
    grid_size: int = 100
    rng: RngState = RngState(0)
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class DesparsifiedFit:
    """Everything the pipeline computed, on the standardized scale."""

    b_hat_std: np.ndarray
    se_sandwich_std: np.ndarray
    se_classic_std: np.ndarray
    omega_sq: np.ndarray          # per-coordinate sandwich variances
    sigma_eps_sq: float
    beta_lasso: LassoSolution     # fit of the standardized problem
    nodewise: list
    eps_hat: np.ndarray
    x_means: np.ndarray
    x_scales: np.ndarray
    y_mean: float
    lambda_used: float
    lambda_x_used: float
    diagnostics: DiagnosticsRecord


@dataclass
class InferenceReport:
    """Per-coordinate estimates, intervals, and p-values (original scale)."""

    b_hat: np.ndarray
    se: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    p_values: np.ndarray
    variance_mode: str
    alpha: float
    beta_lasso: LassoSolution
    diagnostics: DiagnosticsRecord


# ---------------------------------------------------------------------------
# Nodewise regressions
# ---------------------------------------------------------------------------

def _nodewise_beta(x, g, j, lambda_x, method, opts):
    """Solve the nodewise problem for column j on the shared Gram matrix.

    Returns the full-length coefficient vector with position j fixed at 0.
    """
    n, p = x.shape
    order = np.concatenate([np.arange(j), np.arange(j + 1, p)]).astype(np.int64)
    b = g[:, j].copy()

    if method == "lasso":
        if lambda_x == 0.0:
            # Unpenalized nodewise fit: exact least-squares projection.
            others = np.delete(x, j, axis=1)
            gamma = ols_solve(others, x[:, j])
            beta = np.insert(gamma, j, 0.0)
            return beta
        beta = np.zeros(p)
        _solve_gram(g, b, float(lambda_x), beta, order, opts)
        return beta

    # square-root Lasso via the scaled alternation, in Gram space
    sigma = math.sqrt(max(g[j, j], 0.0))
    if sigma < 1e-15:
        raise ValidationError(f"column {j} is numerically zero")
    beta = np.zeros(p)
    lam = float(lambda_x)
    converged = False
    for _ in range(opts.max_alternations):
        inner = replace(opts, kkt_tol=max(opts.kkt_tol * sigma, 1e-14))
        _solve_gram(g, b, 2.0 * lam * sigma, beta, order, inner)
        v = g @ beta
        rss_n = max(g[j, j] - 2.0 * float(b @ beta) + float(beta @ v), 0.0)
        sigma_new = math.sqrt(rss_n)
        if sigma_new < 1e-10:
            raise DegenerateInstrumentError(j, zx_inner=0.0, threshold=0.0)
        done = abs(sigma_new - sigma) <= opts.sigma_tol * sigma
        sigma = sigma_new
        if done:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"nodewise sqrt-lasso for column {j} did not stabilize",
            sigma_hat=sigma)
    inner = replace(opts, kkt_tol=max(opts.kkt_tol * sigma, 1e-14))
    _solve_gram(g, b, 2.0 * lam * sigma, beta, order, inner)
    return beta


def _finish_nodewise(x, j, beta, method, lambda_x) -> NodewiseFit:
    n = x.shape[0]
    xj = x[:, j]
    z = xj - x @ beta
    zx_inner = float(z @ xj)
    threshold = DEGENERATE_RTOL * float(xj @ xj)
    if abs(zx_inner) < threshold:
        raise DegenerateInstrumentError(j, zx_inner=zx_inner, threshold=threshold)
    return NodewiseFit(
        j=j,
        gamma_hat=np.delete(beta, j),
        z=z,
        zx_inner=zx_inner,
        z_norm_sq_over_n=float(z @ z) / n,
        method=method,
        lambda_x=float(lambda_x),
    )


def fit_nodewise(x, j, lambda_x, method: str = "lasso",
                 opts: SolverOptions | None = None, gram=None) -> NodewiseFit:
    """Regress column j on all other columns and keep the residual.

    With lambda_x = 0 and method "lasso" the fit is the exact
    least-squares projection, which is the same optimization problem
    solved in closed form; penalized fits run through coordinate descent
    on the shared Gram matrix.
    """
    opts = opts or SolverOptions()
    x = _check_design(x)
    n, p = x.shape
    if p < 2:
        raise ValidationError("nodewise regression needs at least two columns")
    j = int(j)
    if not 0 <= j < p:
        raise ValidationError(f"column index {j} out of range")
    if x[:, j].max() == x[:, j].min():
        raise ValidationError(f"column {j} is constant")
    if method not in NODEWISE_METHODS:
        raise ValidationError(f"unknown nodewise method {method!r}")
    lambda_x = float(lambda_x)
    if lambda_x < 0.0:
        raise ValidationError("lambda_x must be nonnegative")

    g = np.ascontiguousarray(x.T @ x / n) if gram is None else gram
    beta = _nodewise_beta(x, g, j, lambda_x, method, opts)
    return _finish_nodewise(x, j, beta, method, lambda_x)


def fit_all_nodewise(x, lambda_x, method: str = "lasso",
                     opts: SolverOptions | None = None) -> list:
    """One nodewise fit per column, sharing a single Gram matrix."""
    opts = opts or SolverOptions()
    x = _check_design(x)
    n, p = x.shape
    if p < 2:
        raise ValidationError("nodewise regression needs at least two columns")
    g = np.ascontiguousarray(x.T @ x / n)
    fits = []
    for j in range(p):
        try:
            beta = _nodewise_beta(x, g, j, float(lambda_x), method, opts)
            fits.append(_finish_nodewise(x, j, beta, method, float(lambda_x)))
        except (DegenerateInstrumentError, ValidationError):
            raise
        except HdinferError as exc:
            raise ConvergenceError(f"nodewise fit for column {j} failed: {exc}") from exc
    return fits


# ---------------------------------------------------------------------------
# Bias correction and variance estimators
# ---------------------------------------------------------------------------

def desparsify(x, y, beta_lasso, nodewise) -> np.ndarray:
    """Evaluate the de-sparsified estimator for every column.

    Uses the algebraically identical residual form
    b_j = beta_j + Z_j'(y - X beta) / Z_j'X_j, which reproduces the
    projection-minus-bias formula exactly.
    """
    x, y = _check_design(x, y)
    n, p = x.shape
    beta = beta_lasso.beta if hasattr(beta_lasso, "beta") else np.asarray(beta_lasso, dtype=float)
    if beta.shape != (p,):
        raise ValidationError("plug-in coefficient vector has wrong length")
    if len(nodewise) != p or sorted(fit.j for fit in nodewise) != list(range(p)):
        raise ValidationError("need exactly one nodewise fit per column")

    eps = y - x @ beta
    out = np.empty(p)
    for fit in nodewise:
        if fit.zx_inner == 0.0:
            raise DegenerateInstrumentError(fit.j, zx_inner=0.0, threshold=0.0)
        out[fit.j] = beta[fit.j] + float(fit.z @ eps) / fit.zx_inner
    return out


def sandwich_variance(residuals_hat, z) -> float:
    """Empirical variance of eps_i * z_i (the robust omega^2 estimate)."""
    residuals_hat = np.asarray(residuals_hat, dtype=float)
    z = np.asarray(z, dtype=float)
    if residuals_hat.shape != z.shape or residuals_hat.ndim != 1:
        raise ValidationError("residuals and instrument must be equal-length vectors")
    if residuals_hat.shape[0] < 2:
        raise ValidationError("variance needs at least two observations")
    w = residuals_hat * z
    return float(((w - w.mean()) ** 2).mean())


def classic_variance(residuals_hat) -> float:
    """Empirical variance of the residuals (1/n normalization)."""
    residuals_hat = np.asarray(residuals_hat, dtype=float)
    if residuals_hat.ndim != 1 or residuals_hat.shape[0] < 2:
        raise ValidationError("variance needs at least two observations")
    return float(((residuals_hat - residuals_hat.mean()) ** 2).mean())


def compute_diagnostics(x, residuals_hat, nodewise,
                        lambda_used: float = math.nan,
                        lambda_x_used: float = math.nan) -> DiagnosticsRecord:
    """Assumption diagnostics, reported without applying any threshold."""
    x, residuals_hat = _check_design(x, residuals_hat)
    n = x.shape[0]
    d1 = float(np.abs(x.T @ residuals_hat).max() / n)
    if not nodewise:
        raise ValidationError("diagnostics need at least one nodewise fit")
    b1 = min(fit.z_norm_sq_over_n for fit in nodewise)
    return DiagnosticsRecord(
        d1_stat=d1,
        b1_min=float(b1),
        sigma_eps_hat=math.sqrt(classic_variance(residuals_hat)),
        lambda_used=float(lambda_used),
        lambda_x_used=float(lambda_x_used),
    )


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def _validate_config(config: InferenceConfig):
    if config.variance_mode not in VARIANCE_MODES:
        raise ValidationError(f"unknown variance mode {config.variance_mode!r}")
    if config.method not in NODEWISE_METHODS:
        raise ValidationError(f"unknown nodewise method {config.method!r}")
    if not 0.0 < config.alpha < 1.0:
        raise ValidationError("alpha must lie strictly in (0, 1)")
    for name in ("lam", "lambda_x"):
        value = getattr(config, name)
        if value is not None and (not math.isfinite(value) or value < 0.0):
            raise ValidationError(f"{name} must be nonnegative and finite")


def _select_lambda_x(xs, config: InferenceConfig) -> float:
    """CV the nodewise penalty on one randomly chosen column, reuse for all."""
    p = xs.shape[1]
    col = randint(config.rng.derive("nodewise-column"), p)
    target = xs[:, col]
    others = np.delete(xs, col, axis=1)
    cv = cv_lambda_sqrt if config.method == "sqrt-lasso" else cv_lambda
    path = cv(others, target, config.rng.derive("cv-lambda-x"),
              folds=config.cv_folds, grid_size=config.grid_size)
    return path.selected_lambda


def fit_desparsified(x, y, config: InferenceConfig | None = None) -> DesparsifiedFit:
    """Run the full pipeline on standardized data; keep both variance modes."""
    config = config or InferenceConfig()
    _validate_config(config)
    x, y = _check_design(x, y)
    n, p = x.shape
    if n < 2 or p < 2:
        raise ValidationError("need at least 2 rows and 2 columns")

    xs, yc, x_means, x_scales, y_mean = standardize(x, y)

    lam = config.lam
    if lam is None:
        lam = cv_lambda(xs, yc, config.rng.derive("cv-lambda"),
                        folds=config.cv_folds,
                        grid_size=config.grid_size).selected_lambda
    lambda_x = config.lambda_x
    if lambda_x is None:
        lambda_x = _select_lambda_x(xs, config)

    beta_lasso = lasso_cd(xs, yc, lam, config.solver)
    nodewise = fit_all_nodewise(xs, lambda_x, config.method, config.solver)
    b_std = desparsify(xs, yc, beta_lasso, nodewise)
    eps = beta_lasso.residuals

    omega_sq = np.empty(p)
    se_sandwich = np.empty(p)
    se_classic = np.empty(p)
    sigma_sq = classic_variance(eps)
    sqrt_n = math.sqrt(n)
    for fit in nodewise:
        omega_sq[fit.j] = sandwich_variance(eps, fit.z)
        denom = abs(fit.zx_inner)
        se_sandwich[fit.j] = sqrt_n * math.sqrt(omega_sq[fit.j]) / denom
        z_norm = math.sqrt(fit.z_norm_sq_over_n * n)
        se_classic[fit.j] = math.sqrt(sigma_sq) * z_norm / denom

    if not (se_sandwich > 0.0).all() or not (se_classic > 0.0).all():
        raise ConvergenceError("degenerate variance estimate (zero standard error)")

    diagnostics = compute_diagnostics(xs, eps, nodewise, lam, lambda_x)
    return DesparsifiedFit(
        b_hat_std=b_std,
        se_sandwich_std=se_sandwich,
        se_classic_std=se_classic,
        omega_sq=omega_sq,
        sigma_eps_sq=sigma_sq,
        beta_lasso=beta_lasso,
        nodewise=nodewise,
        eps_hat=eps,
        x_means=x_means,
        x_scales=x_scales,
        y_mean=y_mean,
        lambda_used=float(lam),
        lambda_x_used=float(lambda_x),
        diagnostics=diagnostics,
    )


def interval_bounds(b_hat, se, alpha):
    """Two-sided normal confidence bounds b_hat -/+ q_{1-alpha/2} * se."""
    q = normal_quantile(1.0 - alpha / 2.0)
    b_hat = np.asarray(b_hat, dtype=float)
    se = np.asarray(se, dtype=float)
    return b_hat - q * se, b_hat + q * se


def two_sided_p_values(z_stats):
    """p = 2 (1 - Phi(|z|)), computed through the upper tail for accuracy."""
    return np.array([2.0 * normal_sf(abs(z)) for z in np.asarray(z_stats, dtype=float)])


def build_report(x, y, config: InferenceConfig | None = None) -> InferenceReport:
    """De-sparsified Lasso report on the original column scale.

    Estimates and standard errors are divided by the column scale factors,
    so confidence intervals cover coefficients of the unstandardized
    columns. beta_lasso carries the Lasso coefficients mapped back to the
    original scale together with the residuals of the fit; its lambda and
    certificate refer to the standardized problem that was actually solved.
    """
    config = config or InferenceConfig()
    fit = fit_desparsified(x, y, config)

    se_std = (fit.se_sandwich_std if config.variance_mode == "sandwich"
              else fit.se_classic_std)
    b_hat = fit.b_hat_std / fit.x_scales
    se = se_std / fit.x_scales
    ci_lower, ci_upper = interval_bounds(b_hat, se, config.alpha)
    z_stats = fit.b_hat_std / se_std
    p_values = two_sided_p_values(z_stats)

    sol = fit.beta_lasso
    beta_lasso = LassoSolution(
        beta=sol.beta / fit.x_scales,
        lam=sol.lam,
        residuals=sol.residuals,
        iterations=sol.iterations,
        kkt_gap=sol.kkt_gap,
        objective=sol.objective,
        objective_trace=sol.objective_trace,
    )
    return InferenceReport(
        b_hat=b_hat,
        se=se,
        ci_lower=ci_lower,
        ci_upper=ci_upper,
        p_values=p_values,
        variance_mode=config.variance_mode,
        alpha=config.alpha,
        beta_lasso=beta_lasso,
        diagnostics=fit.diagnostics,
    )
