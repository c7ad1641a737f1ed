"""De-sparsified Lasso inference for high-dimensional linear models.

Confidence intervals and tests that stay valid when the fitted linear
model is only an approximation: the misspecification-robust sandwich
variance for random designs, the basis-pursuit target parameter for fixed
designs, population projection oracles for the built-in simulation
models, and a seeded Monte-Carlo harness for coverage experiments.
"""

from .errors import (
    ConvergenceError,
    DegenerateInstrumentError,
    HdinferError,
    NotSpdError,
    RankDeficiencyError,
    ResidualCollapseError,
    ValidationError,
)
from .inference import (
    DesparsifiedFit,
    DiagnosticsRecord,
    InferenceConfig,
    InferenceReport,
    NodewiseFit,
    build_report,
    classic_variance,
    compute_diagnostics,
    desparsify,
    fit_all_nodewise,
    fit_desparsified,
    fit_nodewise,
    sandwich_variance,
)
from .numerics import (
    CovarianceSpec,
    build_covariance,
    cholesky,
    normal_cdf,
    normal_quantile,
    ols_solve,
    sample_mvn,
)
from .oracle import (
    ContainmentReport,
    NonlinearModel,
    PopulationProjection,
    SparsityCurve,
    check_support_containment,
    fixed_design_target,
    make_custom_model,
    make_model,
    population_beta_analytic,
    population_beta_mc,
    population_projection_analytic,
    sparsity_curve,
    submodel_projection,
    verify_sparsity_bounds,
)
from .rng import RngState
from .simharness import (
    CoverageReport,
    ReplicateResult,
    Scenario,
    coverage_by_coefficient,
    make_scenario,
    run_scenario,
    sparsity_figure_data,
)
from .solvers import (
    BasisPursuitOptions,
    BasisPursuitSolution,
    LambdaPath,
    LassoSolution,
    SolverOptions,
    SqrtLassoSolution,
    basis_pursuit,
    cv_lambda,
    lasso_cd,
    lasso_lambda_max,
    soft_threshold,
    sqrt_lasso,
    standardize,
)

__version__ = "0.1.0"
