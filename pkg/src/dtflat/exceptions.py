"""Exception hierarchy shared across the toolkit."""


class DtflatError(Exception):
    """Base class for all toolkit errors."""


class ExpressionSyntaxError(DtflatError):
    """Raised by the parser; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownIdentifierError(DtflatError):
    """An identifier outside the declared variable set."""

    def __init__(self, name: str, position: int = -1):
        msg = f"unknown identifier '{name}'"
        if position >= 0:
            msg += f" (at position {position})"
        super().__init__(msg)
        self.name = name
        self.position = position


class IndeterminateError(DtflatError):
    """Randomized evaluation kept hitting singular points; no verdict."""


class RankDeficientError(DtflatError):
    """A map that must have full generic rank does not."""


class UnsupportedInversionError(DtflatError):
    """Map inversion fell outside the triangular/degree-2 strategy."""

    def __init__(self, message: str, unsolved: list[str] | None = None):
        super().__init__(message)
        self.unsolved = unsolved or []


class UnsolvableIntegralsError(DtflatError):
    """First integrals not found in closed form; carries the PDE system."""

    def __init__(self, message: str, pde_system: list[str]):
        super().__init__(message)
        self.pde_system = pde_system


class ComplementConstructionError(DtflatError):
    """No transversal completing an involutive complement was found."""


class NotReachableError(DtflatError):
    """State completion impossible: the system is locally not reachable."""


class CauchyMismatchError(DtflatError):
    """The computed shift distribution is not the characteristic of P1."""


class NoProjectableInputError(DtflatError):
    """The projectable input distribution is zero-dimensional."""


class UnstableFamilyError(DtflatError):
    """The projectable-family refinement was still shrinking at the cap."""


class TrivialInputError(DtflatError):
    """Trivial-input elimination could not produce an invertible resorting."""


class DecompositionError(DtflatError):
    """An internal consistency check of the normal-form step failed."""


class ChartMismatchError(DtflatError):
    """Operands live on different charts."""
