"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations

from typing import Any, Optional


class NonbossyError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, context: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}


class StructuralError(NonbossyError):
    """Mismatched dimensions or a malformed mechanism description."""


class ValidationError(NonbossyError):
    """Input violates a documented invariant.

    ``path`` names the offending location (a JSON path when the input came
    from a file).
    """

    def __init__(self, message: str, path: str = "$", context=None):
        super().__init__(f"{path}: {message}" if path else message, context)
        self.path = path


class IncompleteListError(NonbossyError):
    """No decision-list entry fires at a profile."""

    def __init__(self, profile):
        super().__init__(f"incomplete list: no entry fires at {format_profile(profile)}")
        self.profile = profile


class PrerequisiteError(NonbossyError):
    """A checker or constructor was called on an input violating its precondition."""

    def __init__(self, message: str, failed: Optional[str] = None):
        super().__init__(message)
        self.failed = failed


class ICRequiredError(PrerequisiteError):
    def __init__(self):
        super().__init__("IC required: the mechanism fails check_ic", failed="IC")


class ApplicabilityError(NonbossyError):
    """Operation does not apply to this kind of environment."""


class SizeError(NonbossyError):
    """A search or synthesis would exceed a configured hard bound."""

    def __init__(self, message: str, cardinality: int, bound: int):
        super().__init__(f"{message}: {cardinality} exceeds bound {bound}")
        self.cardinality = cardinality
        self.bound = bound


class IndependenceRequiredError(NonbossyError):
    def __init__(self):
        super().__init__("independence required: the prior must be a product distribution")


class GridExtensionError(NonbossyError):
    """A prior puts mass on a profile outside the tabulated grid."""

    def __init__(self, profile):
        super().__init__(
            f"grid extension required: {format_profile(profile)} is not a grid profile"
        )
        self.profile = profile


class DominationError(NonbossyError):
    """The domination relation of a single-item list is not a total order.

    For lists that tabulate to IC, IR and NB mechanisms this cannot happen;
    the witness describes the NB violation it implies.
    """

    def __init__(self, message: str, witness: dict):
        super().__init__(message, context={"witness": witness})
        self.witness = witness


def format_profile(profile) -> str:
    return "(" + ", ".join(str(x) for x in profile) + ")"
