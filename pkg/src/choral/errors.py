"""Exception types shared across the package."""


class ChoralError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(ChoralError):
    """Invalid class configuration, robot profile, or scenario field."""


class DegenerateInputError(ChoralError):
    """Input that cannot be resolved (all-zero probability vector, zero-norm embedding)."""


class OutOfBoundsError(ChoralError):
    """A point or cell index falls outside the grid."""


class UnreachableTaskError(ChoralError):
    """No qualifying inspection point exists for a task cluster."""

    def __init__(self, message: str, task_ids: list[int] | None = None):
        super().__init__(message)
        self.task_ids = task_ids or []


class DisconnectedRoadmapError(ChoralError):
    """The roadmap could not be connected; carries the unreachable task ids."""

    def __init__(self, message: str, task_ids: list[int] | None = None):
        super().__init__(message)
        self.task_ids = task_ids or []


class ScenarioError(ChoralError):
    """Scenario file failed to load or validate."""


class MapGenerationError(ChoralError):
    """A synthetic map could not satisfy its spec (usually task placement)."""


class InvalidSolutionError(ChoralError):
    """A routing solution failed validation where a valid one was required."""

    def __init__(self, message: str, violations: tuple[str, ...] = ()):
        super().__init__(message)
        self.violations = violations
