"""Exception types. CLI exit codes hang off these."""


class GravcompError(Exception):
    exit_code = 1


class ValidationError(GravcompError, ValueError):
    """Malformed configuration, file, or out-of-range input."""

    exit_code = 3


class ModelInconsistencyError(ValidationError):
    pass


class IdentifiabilityError(GravcompError):
    """A least-squares problem is rank deficient."""

    exit_code = 4

    def __init__(self, message, joint=None, null_directions=None):
        super().__init__(message)
        self.joint = joint
        self.null_directions = null_directions or []


class IllConditionedProbeError(IdentifiabilityError):
    pass


class SimulationError(GravcompError):
    exit_code = 3

    def __init__(self, message, step=None, pose=None):
        super().__init__(message)
        self.step = step
        self.pose = pose


class UndefinedMetricError(GravcompError, ValueError):
    exit_code = 3
