"""Seeded Monte-Carlo coverage experiments.

Runs replicated de-sparsified Lasso analyses against the appropriate
ground truth (the population projection for random designs, the
basis-pursuit representation for a fixed design), evaluates per-coordinate
confidence-interval coverage, and aggregates average coverage and average
length separately over the active set S0 and its complement.

Randomness management: every replicate derives its own substreams as
hash(base_seed, replicate, purpose), so the design draw, the noise draw,
and the tuning folds never collide and any subset of replicates can be
recomputed independently. Aggregation is an ordered fold over replicate
ids, which makes reports bit-identical however the replicates were
scheduled.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import HdinferError, ValidationError
from .inference import InferenceConfig, build_report
from .numerics import build_covariance, cholesky, sample_mvn
from .oracle import (
    NONZERO_TOL,
    NonlinearModel,
    SparsityCurve,
    fixed_design_target,
    make_model,
    population_projection_analytic,
    sparsity_curve,
)
from .rng import RngState, standard_normals

DESIGN_MODES = ("random", "fixed")


@dataclass
class Scenario:
    """One coverage experiment.

    variance_mode left as None follows the design mode: sandwich for
    random designs, classic for fixed designs. Fixed mode draws the design
    once from fixed_design_seed (the rank condition demands n <= p) and
    renews only the noise across replicates.
    """

    model: NonlinearModel
    n: int
    p: int
    design_mode: str
    replicates: int
    alpha: float = 0.05
    variance_mode: str | None = None
    base_seed: int = 0
    fixed_design_seed: int | None = None
    method: str = "lasso"
    cv_folds: int = 10
    grid_size: int = 100
    workers: int = 1

    def resolved_variance_mode(self) -> str:
        if self.variance_mode is not None:
            return self.variance_mode
        return "sandwich" if self.design_mode == "random" else "classic"


def make_scenario(model_id: str, n: int, p: int, design_mode: str,
                  replicates: int, **kwargs) -> Scenario:
    scenario = Scenario(model=make_model(model_id, p), n=n, p=p,
                        design_mode=design_mode, replicates=replicates, **kwargs)
    _validate_scenario(scenario)
    return scenario


@dataclass
class ReplicateResult:
    replicate_id: int
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    truth: np.ndarray
    covered: np.ndarray
    lengths: np.ndarray


@dataclass
class PerCoordinateRow:
    """Per-coordinate aggregate; j is 1-based in every emitted artifact."""

    j: int
    beta0: float
    coverage: float
    mean_length: float


@dataclass
class CoverageReport:
    avgcov_s0: float | None
    avgcov_s0c: float | None
    avglen_s0: float | None
    avglen_s0c: float | None
    per_coordinate: list
    scenario: dict
    wall_time: float
    replicates_used: int
    failed_replicates: int
    invalid: bool


def _validate_scenario(s: Scenario):
    if s.design_mode not in DESIGN_MODES:
        raise ValidationError(f"unknown design mode {s.design_mode!r}")
    if s.n < 10:
        raise ValidationError("scenario needs n >= 10")
    if s.p < 2:
        raise ValidationError("scenario needs p >= 2")
    if s.replicates < 1:
        raise ValidationError("scenario needs at least one replicate")
    if s.model.p != s.p:
        raise ValidationError("model dimension does not match scenario p")
    if not 0.0 < s.alpha < 1.0:
        raise ValidationError("alpha must lie strictly in (0, 1)")
    if s.design_mode == "fixed":
        if s.fixed_design_seed is None:
            raise ValidationError("fixed design mode requires fixed_design_seed")
        if s.n > s.p:
            raise ValidationError("fixed design mode requires n <= p "
                                  "(full-row-rank representation)")


def scenario_echo(s: Scenario) -> dict:
    return {
        "model": s.model.id,
        "n": s.n,
        "p": s.p,
        "design_mode": s.design_mode,
        "replicates": s.replicates,
        "alpha": s.alpha,
        "variance_mode": s.resolved_variance_mode(),
        "base_seed": s.base_seed,
        "fixed_design_seed": s.fixed_design_seed,
        "method": s.method,
        "cv_folds": s.cv_folds,
        "grid_size": s.grid_size,
    }


def _simulate_response(model: NonlinearModel, x: np.ndarray, rng: RngState) -> np.ndarray:
    xi = model.noise_sd * standard_normals(rng, x.shape[0])
    return model.f0(x) + xi


def _replicate_ci(s: Scenario, r: int, fixed_x, sigma_factor, report_fn):
    """Confidence bounds for replicate r (pure function of the scenario)."""
    rng_r = RngState(s.base_seed).derive("replicate", r)
    if s.design_mode == "fixed":
        x = fixed_x
    else:
        sigma = build_covariance(s.model.covariance)
        x = sample_mvn(rng_r.derive("design"), s.n, sigma, factor=sigma_factor)
    y = _simulate_response(s.model, x, rng_r.derive("noise"))
    config = InferenceConfig(
        variance_mode=s.resolved_variance_mode(),
        alpha=s.alpha,
        method=s.method,
        cv_folds=s.cv_folds,
        grid_size=s.grid_size,
        rng=rng_r.derive("tuning"),
    )
    report = report_fn(x, y, config)
    return report.ci_lower, report.ci_upper


def _replicate_worker(args):
    s, r, fixed_x, sigma_factor = args
    try:
        lo, hi = _replicate_ci(s, r, fixed_x, sigma_factor, build_report)
        return r, lo, hi, None
    except HdinferError as exc:
        return r, None, None, f"{type(exc).__name__}: {exc}"


def aggregate_results(results, truth, replicates_requested):
    """Ordered fold of replicate results into the coverage aggregates.

    Coverage values are exact fractions k / (number of successful
    replicates). S0 is read off the truth vector at the 1e-12 threshold.
    """
    truth = np.asarray(truth, dtype=float)
    p = truth.shape[0]
    used = len(results)
    if used == 0:
        raise ValidationError("no successful replicates to aggregate")
    cover_counts = np.zeros(p, dtype=np.int64)
    length_sums = np.zeros(p)
    for res in sorted(results, key=lambda r: r.replicate_id):
        cover_counts += res.covered
        length_sums += res.lengths
    coverage = cover_counts / used
    mean_length = length_sums / used

    s0 = np.abs(truth) > NONZERO_TOL
    rows = [PerCoordinateRow(j=j + 1, beta0=float(truth[j]),
                             coverage=float(coverage[j]),
                             mean_length=float(mean_length[j]))
            for j in range(p)]

    def _avg(values, mask):
        return float(values[mask].mean()) if mask.any() else None

    return {
        "avgcov_s0": _avg(coverage, s0),
        "avgcov_s0c": _avg(coverage, ~s0),
        "avglen_s0": _avg(mean_length, s0),
        "avglen_s0c": _avg(mean_length, ~s0),
        "per_coordinate": rows,
        "replicates_used": used,
    }


def fixed_design_matrix(s: Scenario) -> np.ndarray:
    """The one design a fixed-mode scenario uses for every replicate."""
    sigma = build_covariance(s.model.covariance)
    return sample_mvn(RngState(s.fixed_design_seed).derive("fixed-design"),
                      s.n, sigma, factor=cholesky(sigma))


def scenario_truth(s: Scenario, fixed_x=None) -> np.ndarray:
    """Ground truth the intervals are judged against (computed once)."""
    if s.design_mode == "random":
        return population_projection_analytic(s.model).beta0
    x = fixed_design_matrix(s) if fixed_x is None else fixed_x
    return fixed_design_target(x, s.model)


def run_scenario(s: Scenario, report_fn=None) -> CoverageReport:
    """Execute all replicates and aggregate coverage and lengths.

    ``report_fn`` is a test seam: it replaces the inference pipeline
    (signature (x, y, config) -> report with ci_lower/ci_upper) and forces
    inline execution. Failed replicates are skipped and counted; a report
    with more than 5 percent failures is marked invalid.
    """
    _validate_scenario(s)
    start = time.perf_counter()

    fixed_x = fixed_design_matrix(s) if s.design_mode == "fixed" else None
    truth = scenario_truth(s, fixed_x)
    sigma_factor = None
    if s.design_mode == "random":
        sigma_factor = cholesky(build_covariance(s.model.covariance))

    failures: list[str] = []
    results: list[ReplicateResult] = []

    def _collect(r, lo, hi, err):
        if err is not None:
            failures.append(f"replicate {r}: {err}")
            return
        covered = (lo <= truth) & (truth <= hi)
        results.append(ReplicateResult(
            replicate_id=r,
            ci_lower=lo,
            ci_upper=hi,
            truth=truth,
            covered=covered.astype(np.int64),
            lengths=hi - lo,
        ))

    if report_fn is not None or s.workers <= 1 or s.replicates == 1:
        fn = report_fn or build_report
        for r in range(s.replicates):
            try:
                lo, hi = _replicate_ci(s, r, fixed_x, sigma_factor, fn)
                _collect(r, lo, hi, None)
            except HdinferError as exc:
                _collect(r, None, None, f"{type(exc).__name__}: {exc}")
    else:
        tasks = [(s, r, fixed_x, sigma_factor) for r in range(s.replicates)]
        with ProcessPoolExecutor(max_workers=min(s.workers, s.replicates)) as pool:
            for r, lo, hi, err in pool.map(_replicate_worker, tasks):
                _collect(r, lo, hi, err)

    agg = aggregate_results(results, truth, s.replicates)
    wall = time.perf_counter() - start
    failed = len(failures)
    return CoverageReport(
        avgcov_s0=agg["avgcov_s0"],
        avgcov_s0c=agg["avgcov_s0c"],
        avglen_s0=agg["avglen_s0"],
        avglen_s0c=agg["avglen_s0c"],
        per_coordinate=agg["per_coordinate"],
        scenario=scenario_echo(s),
        wall_time=wall,
        replicates_used=agg["replicates_used"],
        failed_replicates=failed,
        invalid=failed > 0.05 * s.replicates,
    )


def coverage_by_coefficient(results) -> list:
    """(j, beta0_j, coverage) for the active coordinates, ascending |beta0_j|.

    All results must share one truth vector; j is 1-based as in every
    emitted table.
    """
    if not results:
        raise ValidationError("no replicate results")
    truth = results[0].truth
    for res in results[1:]:
        if not np.array_equal(res.truth, truth):
            raise ValidationError("replicates disagree about the truth vector")
    used = len(results)
    p = truth.shape[0]
    counts = np.zeros(p, dtype=np.int64)
    for res in results:
        counts += res.covered
    active = np.flatnonzero(np.abs(truth) > NONZERO_TOL)
    ordered = active[np.argsort(np.abs(truth[active]), kind="stable")]
    return [(int(j) + 1, float(truth[j]), float(counts[j] / used)) for j in ordered]


def sparsity_figure_data(s: Scenario, runs: int) -> list:
    """Per-run basis-pursuit sparsity curves for a fixed-design scenario.

    Each run draws a fresh design from its own substream, computes the
    minimum-l1 representation of the function values, and records its
    weak-sparsity curve on the standard 101-point grid.
    """
    _validate_scenario(s)
    if s.design_mode != "fixed":
        raise ValidationError("sparsity figure data is defined for fixed designs")
    if runs < 1:
        raise ValidationError("need at least one run")
    sigma = build_covariance(s.model.covariance)
    factor = cholesky(sigma)
    curves: list[SparsityCurve] = []
    for run in range(runs):
        rng = RngState(s.base_seed).derive("sparsity-run", run)
        x = sample_mvn(rng, s.n, sigma, factor=factor)
        beta = fixed_design_target(x, s.model)
        curves.append(sparsity_curve(beta))
    return curves
