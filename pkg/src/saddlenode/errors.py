"""Exception hierarchy shared by every module.

Each error class carries its own name so that reports can surface it
verbatim (``type(err).__name__``).
"""


class SaddleNodeError(Exception):
    """Base class for all errors raised by the package."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class RejectedInput(SaddleNodeError, ValueError):
    """Input violates a documented precondition."""


class ModeMismatch(RejectedInput):
    """Operands use different coefficient modes (exact vs float)."""


class ParseError(SaddleNodeError, ValueError):
    """Malformed text document.  ``line`` is 1-based, or None."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)

    def to_dict(self):
        d = super().to_dict()
        d["line"] = self.line
        return d


class DegenerateResidue(SaddleNodeError):
    """A homogeneous linear solve of the normalizer was singular."""

    def __init__(self, message, degree=None):
        self.degree = degree
        super().__init__(message)


class TruncationTooSmall(SaddleNodeError):
    pass


class DivIntegrabilityObstruction(SaddleNodeError):
    """c1 + c2 does not vanish; ``witness`` is the offending monomial."""

    def __init__(self, message, witness=None, value=None):
        self.witness = witness
        self.value = value
        super().__init__(message)


class NotTransversallyHamiltonian(SaddleNodeError):
    pass


class PoleOnRay(SaddleNodeError):
    def __init__(self, message, pole=None):
        self.pole = pole
        super().__init__(message)


class QuadratureFailure(SaddleNodeError):
    pass


class XOutsideSector(SaddleNodeError):
    pass


class OverflowGuard(SaddleNodeError):
    pass


class MonomialCutoffTooSmall(SaddleNodeError):
    pass


class NewtonDivergence(SaddleNodeError):
    pass


class AnnulusEmpty(SaddleNodeError):
    pass


class InsufficientRange(SaddleNodeError):
    pass
