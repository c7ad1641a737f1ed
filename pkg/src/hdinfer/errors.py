"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: validation and rank
problems on the inputs exit with 2, numerical failures during solving
exit with 3.
"""


class HdinferError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HdinferError, ValueError):
    """Bad input: shapes, domains, malformed files, inconsistent options."""


class NotSpdError(HdinferError, ValueError):
    """A matrix that must be symmetric positive definite is not.

    ``order`` is the 1-based order of the first failing leading minor,
    i.e. the Cholesky pivot at which the factorization broke down.
    """

    def __init__(self, order, pivot=None):
        self.order = int(order)
        self.pivot = pivot
        detail = "" if pivot is None else f" (pivot {pivot:.6g})"
        super().__init__(
            f"matrix is not positive definite: leading minor of order "
            f"{self.order} is non-positive{detail}"
        )


class RankDeficiencyError(HdinferError, ValueError):
    """Design matrix does not have the rank the operation requires."""


class ConvergenceError(HdinferError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance.

    ``gaps`` carries the final optimality / feasibility measures so callers
    can report how far the run was from converging.
    """

    def __init__(self, message, **gaps):
        self.gaps = gaps
        if gaps:
            detail = ", ".join(f"{k}={v:.3e}" for k, v in gaps.items())
            message = f"{message} ({detail})"
        super().__init__(message)


class ResidualCollapseError(ConvergenceError):
    """Square-root Lasso residual collapsed to zero (interpolation)."""


class DegenerateInstrumentError(HdinferError, RuntimeError):
    """A nodewise residual is essentially orthogonal to its own column.

    The inner product between the instrument and the column it was built
    for fell below threshold, so the de-sparsified estimator for that
    coordinate is undefined.
    """

    def __init__(self, j, zx_inner=None, threshold=None):
        self.j = int(j)
        self.zx_inner = zx_inner
        self.threshold = threshold
        msg = f"degenerate instrument for column {self.j}"
        if zx_inner is not None and threshold is not None:
            msg += f": |z'x_j| = {abs(zx_inner):.3e} < {threshold:.3e}"
        super().__init__(msg)
