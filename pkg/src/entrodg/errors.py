"""Exception types shared across the solver, with CLI exit codes."""


class PreconditionError(ValueError):
    """A run was configured outside a documented precondition."""

    exit_code = 2


class InadmissibleStateError(RuntimeError):
    """The numerical state left the admissible set (NaN, nonpositive density/pressure)."""

    exit_code = 3


class OutputError(OSError):
    """Result files could not be written."""

    exit_code = 4
