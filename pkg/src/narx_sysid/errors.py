"""Exception hierarchy shared by the toolkit."""


class SysIdError(Exception):
    """Base class for every error raised by narx_sysid."""


class ConfigurationError(SysIdError, ValueError):
    """A specification or config value violates its invariants."""


class ArgumentError(SysIdError, ValueError):
    """A function received arguments outside its domain."""


class DesignError(SysIdError):
    """An excitation design problem has no feasible solution."""


class SimulationFault(SysIdError):
    """The plant integration left its valid region (singularity or NaN)."""


class ExperimentError(SysIdError):
    """A closed-loop experiment went unstable.

    ``sample`` is the index of the first offending sample.
    """

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class ModelError(SysIdError):
    """Model shapes or file contents are inconsistent."""


class TrainingError(SysIdError):
    """Training diverged or the damped normal equations stayed singular."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
