import math

import numpy as np
import pytest

from hdinfer.errors import NotSpdError, ValidationError
from hdinfer.numerics import CovarianceSpec, build_covariance
from hdinfer.oracle import (
    Constant,
    Linear,
    ShiftedSquare,
    SinOfProduct,
    check_support_containment,
    fixed_design_target,
    make_custom_model,
    make_model,
    mc_function_mean,
    model_mean,
    population_beta_analytic,
    population_beta_mc,
    population_gamma_analytic,
    population_projection_analytic,
    sparsity_curve,
    submodel_projection,
    verify_sparsity_bounds,
)
from hdinfer.rng import RngState
from hdinfer.simharness import make_scenario, sparsity_figure_data

PAPER_BETA = {
    "M1": [0.0, 0.0, -4.0, 0.0, 2.0, 1.0],
    "M2": [0.0, 0.0, 0.6, 0.0, 1.0, 0.5],
    "M3": [0.0, 0.0, -4.0, 0.0, 2.0, 1.0],
    "M4": [0.0, 0.0, 0.6, 0.0, 1.0, 0.5],
}


def padded_reference(model_id, p):
    ref = np.zeros(p)
    ref[:6] = PAPER_BETA[model_id]
    return ref


# ---------------------------------------------------------------------------
# Analytic projection
# ---------------------------------------------------------------------------

def test_identity_covariance_returns_gamma(nprng):
    gamma = nprng.standard_normal(6)
    beta = population_beta_analytic(np.eye(6), gamma)
    assert np.abs(beta - gamma).max() < 1e-14


def test_correlated_block_solve_by_hand():
    # Covariances of the squared term with the correlated pair are (-4, -3.2)
    # (third Gaussian moments vanish, so only the linear part contributes);
    # solving the 2x2 system by hand gives (-4, 0).
    sigma_block = np.array([[1.0, 0.8], [0.8, 1.0]])
    gamma_block = np.array([-4.0, -3.2])
    beta = population_beta_analytic(sigma_block, gamma_block)
    assert abs(beta[0] + 4.0) < 1e-12
    assert abs(beta[1]) < 1e-12


def test_zero_gamma_gives_zero_beta():
    sigma = build_covariance(CovarianceSpec(kind="toeplitz", p=4, rho=0.5))
    assert np.array_equal(population_beta_analytic(sigma, np.zeros(4)), np.zeros(4))


def test_analytic_rejects_non_spd():
    with pytest.raises(NotSpdError):
        population_beta_analytic(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))


@pytest.mark.parametrize("model_id", ["M1", "M2", "M3", "M4"])
def test_analytic_projection_matches_reference_vectors(model_id):
    model = make_model(model_id, p=12)
    proj = population_projection_analytic(model)
    assert np.abs(proj.beta0 - padded_reference(model_id, 12)).max() < 1e-10


def test_analytic_gamma_for_pair_model():
    model = make_model("M1", p=8)
    gamma = population_gamma_analytic(model)
    expected = np.zeros(8)
    expected[2] = -4.0
    expected[3] = -3.2
    expected[4] = 2.0
    expected[5] = 1.0
    assert np.abs(gamma - expected).max() < 1e-12


def test_custom_linear_model_projection():
    cov = CovarianceSpec(kind="identity", p=5)
    model = make_custom_model([Linear(2.0, 0)], cov)
    proj = population_projection_analytic(model)
    assert np.abs(proj.beta0 - np.array([2.0, 0, 0, 0, 0])).max() < 1e-14


# ---------------------------------------------------------------------------
# Monte-Carlo projection
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("model_id", ["M1", "M2"])
def test_mc_projection_agrees_with_analytic(model_id):
    model = make_model(model_id, p=8)
    analytic = population_projection_analytic(model).beta0
    for estimator in ("gradient", "covariance"):
        proj = population_beta_mc(model, RngState(101), 200_000, estimator=estimator)
        band = 3.0 * proj.mc_se + 1e-9
        assert np.all(np.abs(proj.beta0 - analytic) <= band), estimator


def test_mc_projection_near_reference_small_draws():
    model = make_model("M2", p=8)
    proj = population_beta_mc(model, RngState(7), 100_000)
    assert np.abs(proj.beta0 - padded_reference("M2", 8)).max() < 0.05


def test_mc_projection_validates_draws():
    model = make_model("M1", p=6)
    with pytest.raises(ValidationError):
        population_beta_mc(model, RngState(0), 100)
    with pytest.raises(ValidationError):
        population_beta_mc(model, RngState(0), 50_000, estimator="bootstrap")


def test_mc_projection_deterministic():
    model = make_model("M3", p=7)
    a = population_beta_mc(model, RngState(55), 50_000)
    b = population_beta_mc(model, RngState(55), 50_000)
    assert np.array_equal(a.beta0, b.beta0)
    assert np.array_equal(a.mc_se, b.mc_se)


# ---------------------------------------------------------------------------
# Support containment and submodel projections
# ---------------------------------------------------------------------------

def test_containment_on_reference_models():
    for model_id in ("M1", "M2", "M3", "M4"):
        model = make_model(model_id, p=10)
        beta0 = population_projection_analytic(model).beta0
        report = check_support_containment(model, beta0, tol=1e-10)
        assert report.ok
        # S0 = {3, 5, 6} inside S_f0 = {1, 2, 3, 5, 6} (1-based)
        assert model.support == frozenset({0, 1, 2, 4, 5})


def test_containment_zero_vector_and_violation():
    model = make_model("M1", p=10)
    assert check_support_containment(model, np.zeros(10), 1e-12).ok
    corrupted = np.zeros(10)
    corrupted[6] = 0.5  # coordinate 7 in 1-based labels, off the support
    report = check_support_containment(model, corrupted, 1e-12)
    assert report.violations == (6,)


def test_submodel_projection_worked_examples():
    # Blocks of the first model family: {1,2} sine, {3} square, {5}, {6}.
    model = make_model("M1", p=10)
    blocks = {frozenset(b) for b in model.partition}
    assert blocks == {frozenset({0, 1}), frozenset({2}), frozenset({4}), frozenset({5})}

    by_block = {frozenset(b): k for k, b in enumerate(model.partition)}
    rng = RngState(404)

    proj_sq = submodel_projection(model, by_block[frozenset({2})], rng, 200_000)
    assert abs(proj_sq.beta0[2] + 4.0) <= 3.0 * proj_sq.mc_se[2] + 1e-9

    proj_lin = submodel_projection(model, by_block[frozenset({4})], rng, 200_000)
    assert abs(proj_lin.beta0[4] - 2.0) <= 3.0 * proj_lin.mc_se[4] + 1e-9

    # The last additive term projects to 1 on coordinate 6 (1-based).
    proj_last = submodel_projection(model, by_block[frozenset({5})], rng, 200_000)
    assert abs(proj_last.beta0[5] - 1.0) <= 3.0 * proj_last.mc_se[5] + 1e-9

    proj_sin = submodel_projection(model, by_block[frozenset({0, 1})], rng, 200_000)
    assert np.all(np.abs(proj_sin.beta0[[0, 1]]) <= 3.0 * proj_sin.mc_se[[0, 1]] + 1e-9)


@pytest.mark.parametrize("model_id", ["M1", "M2"])
def test_full_and_submodel_projections_agree(model_id):
    model = make_model(model_id, p=8)
    full = population_beta_mc(model, RngState(11), 300_000, estimator="covariance")
    combined = np.zeros(8)
    bands = np.zeros(8)
    for k, block in enumerate(model.partition):
        sub = submodel_projection(model, k, RngState(12), 300_000)
        idx = sorted(block)
        combined[idx] = sub.beta0[idx]
        bands[idx] = sub.mc_se[idx]
    for j in range(8):
        tol = 3.0 * (full.mc_se[j] + bands[j]) + 1e-9
        assert abs(full.beta0[j] - combined[j]) <= tol


def test_submodel_projection_validates_index():
    model = make_model("M1", p=8)
    with pytest.raises(ValidationError):
        submodel_projection(model, 9, RngState(0), 50_000)


# ---------------------------------------------------------------------------
# Model definitions
# ---------------------------------------------------------------------------

def test_model_factory_validation():
    with pytest.raises(ValidationError):
        make_model("M9", p=10)
    with pytest.raises(ValidationError):
        make_model("M1", p=4)
    model = make_model("M4", p=6)
    assert model.noise_sd == 1.0
    assert model.covariance.kind == "toeplitz"


def test_model_means_analytic_vs_mc():
    # The -5 intercept centers the first family exactly under the pair
    # covariance; under the Toeplitz design both families have nonzero
    # means with the closed forms below.
    expected = {
        "M1": 0.0,
        "M2": 0.0,
        "M3": 2.0 * (complex(1.0 + math.pi ** 2 * (1 - 0.64), -2 * 0.8 * math.pi) ** -0.5).imag,
        "M4": 0.8 * (math.pi / 2.0) * math.exp(-(math.pi ** 2) / 8.0),
    }
    assert expected["M3"] == pytest.approx(0.3113215, abs=1e-6)
    assert expected["M4"] == pytest.approx(0.3659490, abs=1e-6)
    for model_id, target in expected.items():
        model = make_model(model_id, p=8)
        assert model_mean(model) == pytest.approx(target, abs=1e-12)
        emp = mc_function_mean(model, RngState(21), 1_000_000)
        assert abs(emp - target) < 0.01


def test_sine_terms_require_unit_variance():
    cov = CovarianceSpec(kind="explicit", p=2,
                         matrix=np.array([[2.0, 0.0], [0.0, 1.0]]))
    model = make_custom_model([SinOfProduct(1.0, math.pi, 0, 1)], cov)
    with pytest.raises(ValidationError):
        population_gamma_analytic(model)


# ---------------------------------------------------------------------------
# Sparsity curves
# ---------------------------------------------------------------------------

def test_sparsity_curve_point_cases():
    curve = sparsity_curve(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.3, 0.5, 1.0]))
    assert np.array_equal(curve.norms, np.ones(4))

    curve = sparsity_curve(np.array([2.0, 0.0]), np.array([0.5]))
    assert curve.norms[0] == pytest.approx(math.sqrt(2.0), rel=1e-12)

    curve = sparsity_curve(np.array([2.0, 0.0]), np.array([0.0]))
    assert curve.norms[0] == 1.0


def test_sparsity_curve_default_grid_and_monotone_subunit():
    beta = np.array([0.5, -0.25, 0.1, 0.0])
    curve = sparsity_curve(beta)
    assert curve.r_grid.shape == (101,)
    assert curve.norms[0] == 3.0
    # entries below one in magnitude make r -> sum |b|^r decreasing
    assert np.all(np.diff(curve.norms[1:]) <= 1e-12)


def test_sparsity_curve_domain():
    with pytest.raises(ValidationError):
        sparsity_curve(np.ones(3), np.array([0.5, 1.2]))


# ---------------------------------------------------------------------------
# Sparsity bounds
# ---------------------------------------------------------------------------

def test_bounds_identity_holds_with_equality(nprng):
    gamma = nprng.standard_normal(6)
    report = verify_sparsity_bounds(np.eye(6), gamma, r=0.7)
    assert report.all_hold
    lr = report.checks[0]
    assert lr.lhs == pytest.approx(lr.rhs, rel=1e-9)


def _random_block_sigma(rng, p_max=24, block_max=4):
    sizes = []
    total = 0
    p_target = int(rng.integers(4, p_max + 1))
    while total < p_target:
        b = int(rng.integers(1, block_max + 1))
        b = min(b, p_target - total)
        sizes.append(b)
        total += b
    sigma = np.zeros((total, total))
    start = 0
    for b in sizes:
        if b == 1:
            block = np.array([[1.0]])
        else:
            rho = rng.uniform(-0.9 / (b - 1), 0.9)
            block = np.full((b, b), rho)
            np.fill_diagonal(block, 1.0)
        sigma[start:start + b, start:start + b] = block
        start += b
    return sigma, sizes


def test_bounds_hold_on_200_random_block_instances(nprng):
    for _ in range(200):
        sigma, sizes = _random_block_sigma(nprng)
        p = sigma.shape[0]
        gamma = np.zeros(p)
        support = nprng.choice(p, size=int(nprng.integers(1, max(2, p // 3))),
                               replace=False)
        gamma[support] = nprng.standard_normal(support.size)
        r = float(nprng.uniform(0.05, 1.0))
        report = verify_sparsity_bounds(sigma, gamma, r)
        assert report.all_hold

        # independent recomputation of the l_r bound with plain numpy
        inv = np.linalg.inv(sigma)
        beta = np.linalg.solve(sigma, gamma)
        lhs = (np.abs(beta) ** r).sum() ** (1 / r)
        rhs = max((np.abs(inv[:, l]) ** r).sum() ** (1 / r) for l in range(p)) \
            * (np.abs(gamma) ** r).sum() ** (1 / r)
        assert lhs <= rhs + 1e-9 * (1 + rhs)
        assert report.checks[0].lhs == pytest.approx(lhs, rel=1e-9)
        assert report.checks[0].rhs == pytest.approx(rhs, rel=1e-9)


def test_block_dependence_corollary_instance(nprng):
    # Maximal block size 2, function support of three variables: the
    # nonzero count of the projection is bounded by 2^2 * 3 = 12.
    blocks = [(0, 1), (2, 3), (4, 5), (6, 7)]
    sigma = np.eye(8)
    for a, b in blocks:
        sigma[a, b] = sigma[b, a] = 0.6
    support = (0, 2, 4)
    gamma = np.zeros(8)
    for s in support:  # covariance spreads only within the touched blocks
        gamma[s] = nprng.standard_normal()
        gamma[s + 1] = nprng.standard_normal() * 0.5
    report = verify_sparsity_bounds(sigma, gamma, r=0.5, support=support)
    assert report.all_hold
    l0_block = [c for c in report.checks if c.name == "l0-block"][0]
    assert l0_block.rhs == 12.0
    assert (np.abs(report.beta0) > 1e-12).sum() <= 12


def test_bounds_validates_size():
    with pytest.raises(ValidationError):
        verify_sparsity_bounds(np.eye(60), np.ones(60), r=0.5)
    with pytest.raises(ValidationError):
        verify_sparsity_bounds(np.eye(4), np.ones(4), r=1.5)


# ---------------------------------------------------------------------------
# Fixed-design target
# ---------------------------------------------------------------------------

def test_fixed_target_square_design(nprng):
    model = make_model("M2", p=8)
    x = nprng.standard_normal((8, 8))
    beta = fixed_design_target(x, model)
    assert np.abs(beta - np.linalg.solve(x, model.f0(x))).max() < 1e-8


def test_fixed_target_sparse_recovery(nprng):
    cov = CovarianceSpec(kind="identity", p=60)
    model = make_custom_model([Linear(1.0, 0)], cov)
    x = nprng.standard_normal((20, 60))
    beta = fixed_design_target(x, model)
    expected = np.zeros(60)
    expected[0] = 1.0
    assert np.abs(beta - expected).max() < 1e-4


def test_fixed_target_reduced_scale_l0():
    n, p = 40, 120
    model = make_model("M3", p=p)
    scenario = make_scenario("M3", n=n, p=p, design_mode="fixed", replicates=1,
                             base_seed=3, fixed_design_seed=17)
    curves = sparsity_figure_data(scenario, runs=2)
    for curve in curves:
        assert curve.norms[0] == n  # nonzero count equals the row count
