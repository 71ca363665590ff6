"""Optimal consumption, investment and life-insurance purchase timing."""

from .model import (
    DerivedConstants,
    ModelParams,
    SimConfig,
    derive_constants,
    human_capital,
    premium_rate,
    validate_assumptions,
)

__all__ = [
    "DerivedConstants",
    "ModelParams",
    "SimConfig",
    "derive_constants",
    "human_capital",
    "premium_rate",
    "validate_assumptions",
]
__version__ = "0.1.0"
