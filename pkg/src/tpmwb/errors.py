"""Exception types shared across the package."""


class UsageError(ValueError):
    """Invalid input: wrong shapes, violated preconditions, bad configuration."""


class DegenerateFrameError(UsageError):
    """Rabi frequency vanishes (b1 == 0 and omega == b0); the mixing angle is undefined."""


class InconsistentMeasurementError(UsageError):
    """A measured magnetization implies a transition probability outside [0, 1]."""


class SingularInputError(UsageError):
    """Input sits on a singularity of the requested formula (e.g. f == 0)."""


class InputFileError(OSError):
    """A file named on the command line could not be read."""
