"""Exception taxonomy shared by all modules.

The split matters for the CLI exit codes: validation problems are exit 2,
invariant violations exit 1, and capability exhaustion (a finite space is
simply too small for the requested construction) exit 3.
"""


class CZBloomError(Exception):
    """Base class for all package errors."""


class SpaceValidationError(CZBloomError):
    """A space file or array violates one of the structural axioms.

    `axiom` names the violated requirement (symmetry, zero-diagonal,
    positive-measure, positive-off-diagonal, shape).
    """

    def __init__(self, axiom: str, detail: str = ""):
        self.axiom = axiom
        super().__init__(f"space axiom violated: {axiom}" + (f" ({detail})" if detail else ""))


class DomainError(CZBloomError):
    """Arguments outside an operation's mathematical domain."""


class ConstructionError(CZBloomError):
    """A built structure failed its own a-posteriori axiom verification.

    `axiom` names the first failed axiom; callers may retry with different
    parameters (e.g. a smaller scale ratio).
    """

    def __init__(self, axiom: str, detail: str = ""):
        self.axiom = axiom
        super().__init__(f"construction failed axiom: {axiom}" + (f" ({detail})" if detail else ""))


class CapabilityError(CZBloomError):
    """The requested computation is not possible at this finite scale.

    Examples: an empty annulus during a companion-ball search, or the
    absorption condition still failing at the largest admissible scale
    parameter.  The message carries the advised remedy.
    """


class PreconditionError(CZBloomError):
    """A verified numerical precondition failed (e.g. a divisor lower bound)."""
