"""Dense linear algebra, covariance constructors, and Gaussian sampling.

Everything operates on plain float64 numpy arrays and is a pure function
of its inputs. The Cholesky factorization is written out column by column
(BLAS-2 inner steps) instead of calling LAPACK so that a failure can name
the exact leading minor that broke positive definiteness; at the problem
sizes this package targets (p up to a few thousand, dense) that costs
little.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotSpdError, RankDeficiencyError, ValidationError
from .rng import RngState, normal_matrix

# Cholesky pivots below this fraction of the largest diagonal entry are
# treated as numerically non-positive.
PIVOT_RTOL = 1e-12


# ---------------------------------------------------------------------------
# Covariance constructors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Recipe for a p x p covariance matrix.

    kind is one of ``identity``, ``single-pair``, ``toeplitz``,
    ``block-diagonal``, ``explicit``. Indices in ``pairs`` and ``blocks``
    are 0-based column indices. ``rho`` is the off-diagonal correlation
    used by the structured kinds; ``matrix`` carries the entries for the
    explicit kind.
    """

    kind: str
    p: int
    rho: float = 0.0
    pairs: tuple = ()
    blocks: tuple = ()
    matrix: np.ndarray | None = None

    KINDS = ("identity", "single-pair", "toeplitz", "block-diagonal", "explicit")


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Materialize the covariance matrix described by ``spec``.

    Structured kinds are validated through their parameters; an explicit
    matrix is validated by running the Cholesky factorization, so a
    non-positive-definite input is rejected with the failing leading minor
    named in the error.
    """
    if spec.kind not in CovarianceSpec.KINDS:
        raise ValidationError(f"unknown covariance kind {spec.kind!r}")
    if spec.kind != "explicit" and spec.p < 1:
        raise ValidationError("covariance dimension must be >= 1")

    if spec.kind == "identity":
        return np.eye(spec.p)

    if spec.kind == "toeplitz":
        if not abs(spec.rho) < 1.0:
            raise ValidationError("toeplitz covariance requires |rho| < 1")
        idx = np.arange(spec.p)
        return spec.rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)

    if spec.kind == "single-pair":
        if not abs(spec.rho) < 1.0:
            raise ValidationError("single-pair covariance requires |rho| < 1")
        sigma = np.eye(spec.p)
        seen: set[int] = set()
        for pair in spec.pairs:
            i, j = int(pair[0]), int(pair[1])
            if i == j or not (0 <= i < spec.p and 0 <= j < spec.p):
                raise ValidationError(f"invalid index pair {pair!r}")
            if i in seen or j in seen:
                raise ValidationError("correlated pairs must be disjoint")
            seen.update((i, j))
            sigma[i, j] = sigma[j, i] = spec.rho
        return sigma

    if spec.kind == "block-diagonal":
        sigma = np.eye(spec.p)
        seen = set()
        for block in spec.blocks:
            ids = [int(i) for i in block]
            if any(not 0 <= i < spec.p for i in ids) or len(set(ids)) != len(ids):
                raise ValidationError(f"invalid block {block!r}")
            if seen.intersection(ids):
                raise ValidationError("blocks must be disjoint")
            seen.update(ids)
            b = len(ids)
            if b > 1 and not (-1.0 / (b - 1) < spec.rho < 1.0):
                raise ValidationError(
                    f"equicorrelation rho={spec.rho} is not positive definite "
                    f"for block size {b}"
                )
            for a in ids:
                for c in ids:
                    if a != c:
                        sigma[a, c] = spec.rho
        return sigma

    # explicit
    if spec.matrix is None:
        raise ValidationError("explicit covariance requires a matrix")
    sigma = np.asarray(spec.matrix, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValidationError("explicit covariance must be square")
    cholesky(sigma)  # raises NotSpdError naming the failing leading minor
    return sigma.copy()


# ---------------------------------------------------------------------------
# Cholesky and triangular solves
# ---------------------------------------------------------------------------

def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix must be square")
    scale = 1.0 + (np.abs(a).max() if a.size else 0.0)
    if np.abs(a - a.T).max(initial=0.0) > 1e-10 * scale:
        raise ValidationError("matrix must be symmetric")
    return a


def cholesky(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T = a.

    Pivots below ``PIVOT_RTOL`` times the largest diagonal entry count as
    non-positive and raise :class:`NotSpdError` with the 1-based order of
    the offending leading minor.
    """
    a = _check_symmetric(a)
    n = a.shape[0]
    if not np.isfinite(a).all():
        raise ValidationError("matrix entries must be finite")
    floor = PIVOT_RTOL * max(float(a.diagonal().max(initial=0.0)), 0.0)
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= floor:
            raise NotSpdError(order=j + 1, pivot=float(pivot))
        ljj = math.sqrt(pivot)
        lower[j, j] = ljj
        if j + 1 < n:
            lower[j + 1:, j] = (a[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / ljj
    return lower


def solve_lower(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve lower @ x = b by forward substitution (b may be 2-D)."""
    x = np.array(b, dtype=float, copy=True)
    for i in range(lower.shape[0]):
        x[i] = (x[i] - lower[i, :i] @ x[:i]) / lower[i, i]
    return x


def solve_upper_from_lower(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve lower.T @ x = b by back substitution (b may be 2-D)."""
    x = np.array(b, dtype=float, copy=True)
    for i in range(lower.shape[0] - 1, -1, -1):
        x[i] = (x[i] - lower[i + 1:, i] @ x[i + 1:]) / lower[i, i]
    return x


def solve_spd(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L @ L.T) x = b given the Cholesky factor L."""
    return solve_upper_from_lower(lower, solve_lower(lower, b))


def spd_inverse(lower: np.ndarray) -> np.ndarray:
    """Inverse of L @ L.T given the Cholesky factor L."""
    return solve_spd(lower, np.eye(lower.shape[0]))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_mvn(rng: RngState, n: int, sigma: np.ndarray,
               factor: np.ndarray | None = None) -> np.ndarray:
    """n independent rows from N(0, sigma), reproducible from ``rng``.

    ``factor`` can carry a precomputed Cholesky factor of sigma so callers
    drawing many batches from one covariance skip refactorizing.
    """
    if n < 1:
        raise ValidationError("sample size must be >= 1")
    lower = cholesky(sigma) if factor is None else factor
    z = normal_matrix(rng, n, lower.shape[0])
    return z @ lower.T


# ---------------------------------------------------------------------------
# Normal distribution helpers
# ---------------------------------------------------------------------------

def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc (accurate in both tails)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def normal_sf(x: float) -> float:
    """Standard normal upper tail probability."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Coefficients of Acklam's rational approximation to the normal quantile.
_ACKLAM_A = (-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00)
_ACKLAM_B = (-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01)
_ACKLAM_C = (-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00)
_ACKLAM_D = (7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00)
_ACKLAM_PLOW = 0.02425


def normal_quantile(u: float) -> float:
    """Inverse standard normal CDF.

    Acklam's rational approximation refined with one Newton step against
    the erfc-based CDF; absolute error is far below the 1e-8 contract.
    Antisymmetry around 0.5 holds exactly by construction.
    """
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValidationError("quantile argument must lie strictly in (0, 1)")
    if u == 0.5:
        return 0.0
    if u > 0.5:
        return -normal_quantile(1.0 - u)

    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if u < _ACKLAM_PLOW:
        q = math.sqrt(-2.0 * math.log(u))
        x = ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
             / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    else:
        q = u - 0.5
        r = q * q
        x = ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
             / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))

    # One Newton refinement against the high-accuracy CDF.
    density = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if density > 0.0:
        x -= (normal_cdf(x) - u) / density
    return x


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

def ols_solve(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients via the normal equations.

    Requires at least as many rows as columns and full column rank; rank
    deficiency surfaces as :class:`RankDeficiencyError`. One round of
    iterative refinement keeps the normal-equation residual below
    1e-10 times the infinity norm of x'y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValidationError("x must be (n, p) and y (n,) with matching n")
    n, p = x.shape
    if n < p:
        raise ValidationError("ols_solve requires rows >= cols")
    gram = x.T @ x
    rhs = x.T @ y
    try:
        lower = cholesky(gram)
    except NotSpdError as exc:
        raise RankDeficiencyError(
            f"design columns are linearly dependent (minor {exc.order})"
        ) from exc
    beta = solve_spd(lower, rhs)
    for _ in range(2):
        resid = rhs - gram @ beta
        scale = max(np.abs(rhs).max(initial=0.0), 1e-300)
        if np.abs(resid).max(initial=0.0) <= 1e-10 * scale:
            break
        beta = beta + solve_spd(lower, resid)
    return beta
