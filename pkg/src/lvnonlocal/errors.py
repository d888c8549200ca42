"""Exception hierarchy.

Input problems raise subclasses of ``ValueError``; failures of the numerics
(step-size blow-ups, lost monotonicity, non-convergence) raise subclasses of
``NumericalError`` so the CLI can map them to distinct exit codes.
"""


class ValidationError(ValueError):
    """Bad user input: scenario keys, shapes, parameter ranges."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class HypothesisError(ValueError):
    """A theorem hypothesis required by the requested construction fails."""


class NumericalError(RuntimeError):
    reason = "numerical_failure"


class NegativityError(NumericalError):
    reason = "negativity"


class NonFiniteError(NumericalError):
    reason = "non_finite"


class MonotonicityError(NumericalError):
    reason = "monotonicity_violation"


class ConvergenceError(NumericalError):
    reason = "no_convergence"

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
