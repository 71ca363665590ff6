"""Exception hierarchy shared by every solver."""

from __future__ import annotations


class LifeInsError(Exception):
    """Base class for all package errors."""


class ModelRejected(LifeInsError):
    """Parameters describe a model the solvers cannot handle."""


class KappaNonPositive(ModelRejected):
    """Income discount rate is not positive, so human capital is infinite."""


class NeedsRhoPlusMGreaterR(ModelRejected):
    """The free-boundary solution requires rho + m > r."""


class DomainError(LifeInsError, ValueError):
    """A query point lies outside the admissible state space."""


class AdmissibilityViolated(LifeInsError):
    """Wealth after purchase does not cover the premium stream."""


class ImmediatePurchase(LifeInsError):
    """The wealth threshold is not defined because purchase happens at once."""


class NoRoot(LifeInsError):
    """A bracketed root search failed."""


class DegenerateBoundary(LifeInsError):
    """The purchase gain is nonpositive so no finite boundary exists."""


class UnsupportedRegime(LifeInsError):
    """The smooth-fit system has no single-boundary solution."""


class NoConvergence(LifeInsError):
    """An iterative scheme stopped before meeting its tolerance.

    Attributes
    ----------
    last : object
        The final iterate, useful for diagnostics.
    movement : float
        Size of the last update.
    """

    def __init__(self, message: str, last=None, movement: float = float("nan")):
        super().__init__(message)
        self.last = last
        self.movement = movement


class NonFiniteUtility(LifeInsError):
    """Simulation produced a nonpositive consumption rate."""


class ConfigError(LifeInsError, ValueError):
    """A configuration file could not be parsed; the message names the line."""
