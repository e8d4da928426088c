"""Exception hierarchy of willflow.

Every class carries the process exit code the command line maps it to.
"""


class WillflowError(Exception):
    exit_code = 1


class ConfigurationError(WillflowError):
    """Bad configuration text, mismatched sizes or unsupported spin weights."""

    exit_code = 2

    def __init__(self, message: str, line: int = None, key: str = None):
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += "line {:d}: ".format(line)
        if key is not None:
            prefix += "[{}] ".format(key)
        super().__init__(prefix + message)


class AdmissibilityError(WillflowError):
    """Initial datum outside the small-energy class."""

    exit_code = 3


class FlowClassError(WillflowError):
    """A flow monitor left its configured bounds during a step."""

    exit_code = 4

    def __init__(self, message: str, state=None, monitor: str = None):
        self.state = state
        self.monitor = monitor
        super().__init__(message)


class AbortedRunError(WillflowError):
    """The time loop gave up after repeated step-size halvings."""

    exit_code = 4

    def __init__(self, message: str, trajectory=None):
        self.trajectory = trajectory
        super().__init__(message)


class SnapshotIOError(WillflowError):
    exit_code = 5

    def __init__(self, message: str, path=None):
        self.path = path
        if path is not None:
            message = "{}: {}".format(path, message)
        super().__init__(message)


class NumericalError(WillflowError):
    exit_code = 6


class DegenerateImmersionError(NumericalError):
    """Rank of dPhi drops below two at some node."""

    def __init__(self, message: str, node=None):
        self.node = node
        if node is not None:
            message = "{} (node {})".format(message, node)
        super().__init__(message)


class GaugeError(NumericalError):
    """Conformal-gauge formulas were applied to a non-conformal immersion."""


class ChartError(NumericalError):
    """A Mobius parameter left the chart ball around the identity."""


class GaugeConvergenceError(NumericalError):
    pass


class ConformalizationError(NumericalError):
    pass


class ResolutionError(NumericalError):
    """Resampling pushed too much energy into the top of the spectrum."""


class ConsistencyError(NumericalError):
    """A Poisson source failed its solvability condition."""
