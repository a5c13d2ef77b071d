"""Routing for mixed ground/aerial robot teams over semantic grid maps."""

__version__ = "0.1.0"

from .errors import (
    ChoralError,
    ConfigurationError,
    DegenerateInputError,
    DisconnectedRoadmapError,
    InvalidSolutionError,
    OutOfBoundsError,
    ScenarioError,
    UnreachableTaskError,
)

__all__ = [
    "ChoralError",
    "ConfigurationError",
    "DegenerateInputError",
    "DisconnectedRoadmapError",
    "InvalidSolutionError",
    "OutOfBoundsError",
    "ScenarioError",
    "UnreachableTaskError",
    "__version__",
]
