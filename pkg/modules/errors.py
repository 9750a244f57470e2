"""
Engine Errors
Exception hierarchy shared by the germ, word, pseudogroup and perturbation engines
"""

from typing import Any, Dict, List, Optional


class PseudogroupError(Exception):
    """Base class for every engine failure"""


class OutOfDomain(PseudogroupError):
    """A point left the domain of a germ or of a pseudogroup element.

    ``index`` is the failing prefix length (letters applied whose result left the
    domain); 0 means the starting point itself was rejected.
    """

    def __init__(self, message: str, index: int = 0, point: Optional[complex] = None):
        super().__init__(message)
        self.index = index
        self.point = point


class ContourOutOfDomain(OutOfDomain):
    """Some contour sample is not evaluable"""


class NewtonDivergence(PseudogroupError):
    """Inverse-node Newton iteration did not reach the residual"""


class EmptyDomain(PseudogroupError):
    """No positive radius survives a composition"""


class InjectivityLoss(PseudogroupError):
    """Perturbed conjugator failed the derivative lower bound"""


class SeparationFailure(PseudogroupError):
    """A fixed point sits (numerically) on a contour"""

    def __init__(self, message: str, contour: Any = None, displacement: float = 0.0):
        super().__init__(message)
        self.contour = contour
        self.displacement = displacement


class NonConvergence(PseudogroupError):
    """Winding quadrature did not settle before the sample cap"""


class DegenerateNodes(PseudogroupError):
    """Interpolation nodes are closer than the gap threshold"""


class PreconditionError(PseudogroupError):
    """Caller violated an operation precondition"""


class CommensurableWords(PreconditionError):
    """Split requested for words with a common primitive root"""

    def __init__(self, message: str, witness: Any = None):
        super().__init__(message)
        self.witness = witness


class BudgetExhausted(PseudogroupError):
    """Search budget spent without a verified result; carries the transcript"""

    def __init__(self, message: str, transcript: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.transcript = transcript or {}


class WordParseError(PseudogroupError, ValueError):
    """Malformed word text; ``position`` is the character offset"""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ConfigError(PseudogroupError):
    """Run document failed validation"""

    def __init__(self, message: str, failed_checks: Optional[List[str]] = None):
        super().__init__(message)
        self.failed_checks = failed_checks or []
