"""Exception types raised across the package."""


class MicroclimbError(Exception):
    """Base class for all package errors."""


class UnreachableTarget(MicroclimbError):
    """IK target lies outside the limb workspace."""


class JointLimitViolation(MicroclimbError):
    """Only limit-violating IK solutions exist for the target."""


class OutOfBounds(MicroclimbError):
    """Query point outside the terrain extents."""


class BadConfig(MicroclimbError):
    """Invalid configuration values."""


class DegenerateGeometry(MicroclimbError):
    """Contact points too degenerate to define a support plane."""


class InfeasiblePlan(MicroclimbError):
    """Planner could not realize a phase (IK failure or joint limits)."""

    def __init__(self, message: str, phase_index: int | None = None):
        super().__init__(message)
        self.phase_index = phase_index


class NoFeasibleTrajectory(MicroclimbError):
    """Swing optimization found no feasible candidate in any restart."""


class NearSingular(MicroclimbError):
    """Momentum-distribution matrix too ill-conditioned to invert."""


class NumericalDivergence(MicroclimbError):
    """Simulation state left the configured sanity bounds."""


class ScenarioParseError(MicroclimbError):
    """Scenario file could not be parsed; message carries line context."""


class ScenarioValidationError(MicroclimbError):
    """Scenario parsed but a key failed validation."""

    def __init__(self, key: str, reason: str):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


class SeedMismatch(MicroclimbError):
    """Compared scenarios do not share the same terrain."""
