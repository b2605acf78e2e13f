"""Exception types shared across the simulation, planning and DP modules."""


class PreheatsimError(Exception):
    """Base class for all toolkit-specific errors."""


class PowerInfeasible(PreheatsimError):
    """The requested terminal power exceeds what the battery can deliver.

    Raised by the current solve when the quadratic discriminant
    ``U_oc**2 - 4*R*P_t`` goes negative, i.e. no real current exists that
    produces the requested terminal power through the internal resistance.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NoCrossing(PreheatsimError):
    """The backward max-heating sweep never meets the forward trajectory.

    Even heating from the very first sample cannot lift the battery to the
    requested temperature by arrival; the planning problem is starved.
    """


class InfeasibleProblem(PreheatsimError):
    """No admissible control sequence reaches the terminal targets."""


class GridTooCoarse(PreheatsimError):
    """The DP grid cannot support a consistent policy extraction.

    Raised when the forward extraction either dead-ends (every control level
    leads to a state the value function marks unreachable) or produces a
    simulated cost that disagrees with the value-function prediction by more
    than the configured tolerance.
    """


class CycleFormatError(PreheatsimError):
    """A drive-cycle file violates the expected CSV layout.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrajectoryIntegrityError(PreheatsimError):
    """A trajectory's stored states are not reproducible by the model step."""
