"""Exception types shared across the package.

``ModelValidityError`` and its subclasses signal that the inputs describe a
mathematically invalid or degenerate model (as opposed to malformed input
files or bad arguments, which raise the usual built-ins).  The CLI maps the
two families onto distinct exit codes.
"""


class ModelValidityError(Exception):
    """A model is mathematically invalid or outside the theory's scope."""


class NonPrimitiveMatrixError(ModelValidityError):
    """A pricing (or modified pricing) matrix has no strictly positive power."""


class ErgodicityError(ModelValidityError):
    """A recovered transition matrix fails irreducibility or aperiodicity."""


class ConvergenceError(ModelValidityError):
    """An iterative solver did not reach its tolerance."""


class ValueFunctionExistenceError(ModelValidityError):
    """The continuation-value quadratic has no real root.

    Carries the (negative) discriminant in ``discriminant``.
    """

    def __init__(self, message: str, discriminant: float):
        super().__init__(message)
        self.discriminant = discriminant


class DegenerateSelectionError(ModelValidityError):
    """No eigenvalue candidate induces mean-reverting dynamics (knife edge)."""


class InfeasibleProblemError(ModelValidityError):
    """The moment constraints of a bound problem cannot be satisfied.

    ``direction`` holds a ray along which the dual objective grows without
    bound, which certifies primal infeasibility.
    """

    def __init__(self, message: str, direction=None):
        super().__init__(message)
        self.direction = direction


class BlowUpError(ModelValidityError):
    """An ODE solution explodes before the requested horizon.

    ``blow_up_time`` is an estimate of the explosion time.
    """

    def __init__(self, message: str, blow_up_time: float):
        super().__init__(message)
        self.blow_up_time = blow_up_time
