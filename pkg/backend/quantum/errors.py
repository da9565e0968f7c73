"""
Error types for the pointer-state toolkit.

Everything raised on purpose derives from PointerStateError, which is a
ValueError so callers that only know about bad input still catch it.
NumericRegimeError marks inputs that are well-formed but outside the
regime the numerics support (the CLI maps it to exit code 3).
"""


class PointerStateError(ValueError):
    """Base class for all toolkit errors"""


class NumericRegimeError(PointerStateError):
    """Well-formed input that the numerics cannot handle"""


# --- linear algebra ---------------------------------------------------------

class NonHermitianInput(PointerStateError):
    pass


class NonUnitaryInput(PointerStateError):
    pass


class DimensionMismatch(PointerStateError):
    pass


class NotPureInitial(PointerStateError):
    pass


class NotNormalized(PointerStateError):
    pass


class BasisNotOrthonormal(PointerStateError):
    pass


class InvalidDensity(PointerStateError):
    pass


class BranchAmbiguity(NumericRegimeError):
    """An eigenphase of the cycle propagator sits on the branch cut at ±π"""

    def __init__(self, message: str, hint: str = "reduce tau so that T_c*||H_c|| < pi"):
        super().__init__(f"{message} (hint: {hint})")
        self.hint = hint


# --- model ------------------------------------------------------------------

class DimensionTooLarge(PointerStateError):
    pass


# --- pulses -----------------------------------------------------------------

class BadP(PointerStateError):
    pass


class CycleNotClosed(PointerStateError):
    pass


class NotUniformCycle(PointerStateError):
    pass


class UnknownName(PointerStateError):
    pass


class RNotInvolution(PointerStateError):
    pass


class MissingErrorEntry(PointerStateError):
    pass


# --- propagation / analysis -------------------------------------------------

class EmptyTrajectory(PointerStateError):
    pass


class ZeroGap(NumericRegimeError):
    """Pointer sectors are degenerate; the cycle needs desymmetrization"""


class RegimeViolation(NumericRegimeError):
    pass


class ZeroSplitting(NumericRegimeError):
    pass


class InsufficientPoints(PointerStateError):
    pass


# --- configuration ----------------------------------------------------------

class ConfigInvalid(PointerStateError):
    """Experiment document failed validation at `field_path`"""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path
        self.reason = message
