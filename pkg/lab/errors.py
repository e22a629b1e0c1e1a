"""Exception hierarchy for the concentration lab."""

from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for every error raised by the lab."""


class DomainError(LabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PreconditionError(LabError, ValueError):
    """A hypothesis of the bound being evaluated does not hold."""


class NumericalFailure(LabError, RuntimeError):
    """
    Root finding or quadrature did not converge.

    Attributes:
        diagnostic (Dict[str, Any]): Bracket endpoints, residuals and similar context
    """

    def __init__(self, message: str, diagnostic: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class DifferentialConditionError(PreconditionError):
    """
    The condition -1/p <= g''/(g')^2 <= b failed on the check grid.

    Attributes:
        grid_point (float): First grid point where the ratio left the band
        ratio (float): Finite-difference value of g''/(g')^2 there
        side (str): "lower" or "upper", the violated side
    """

    def __init__(self, grid_point: float, ratio: float, side: str, p: float, b: float):
        limit = -1.0 / p if side == "lower" else b
        super().__init__(
            f"differential condition violated at x={grid_point:.6g}: "
            f"g''/(g')^2={ratio:.6g} ({side} limit {limit:.6g})"
        )
        self.grid_point = grid_point
        self.ratio = ratio
        self.side = side


class NetBudgetError(LabError, ValueError):
    """The requested epsilon-net exceeds the materialization budget."""


class UnresolvableIdError(LabError, KeyError):
    """A law, statistic, bound or function id is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unresolvable id"
