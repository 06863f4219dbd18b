"""Exception types shared across the toolkit."""


class PlastokitError(Exception):
    """Base class for all toolkit errors."""


class NumericalFailure(PlastokitError):
    """An iterative numerical kernel (eigen-solve, ...) failed to converge."""


class NonFinite(PlastokitError):
    """A forward evaluation produced NaN or Inf."""


class NoConvergence(PlastokitError):
    """A Newton solve exhausted its iteration budget."""

    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class NegativeMultiplier(PlastokitError):
    """A converged plastic multiplier came out negative (formulation bug)."""


class DegenerateState(PlastokitError):
    """Yield gradient requested at (or too close to) the hydrostatic axis."""


class ConstraintViolation(PlastokitError):
    """A constrained network no longer satisfies its weight constraints."""


class SingularSystem(PlastokitError):
    """A linear system needed for a tangent or adjoint is rank-deficient."""


class GlobalNoConvergence(PlastokitError):
    """The global FEM Newton loop did not reach its residual tolerance."""


class ParseError(PlastokitError):
    """Malformed input file."""


class EmptyDataset(PlastokitError):
    """A dataset file contained no usable rows."""


class NonFiniteValue(PlastokitError):
    """A dataset row contained NaN or Inf."""


class PathOutsideData(PlastokitError):
    """A loading-path increment falls outside the dataset hull."""
