"""
Error types raised by relifit.

Every error carries a short machine-greppable ``code`` and the process exit
code the CLI uses for it.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FIT = 3
EXIT_IO = 4


class RelifitError(Exception):
    """Base class for all relifit errors."""

    code = 'E_RELIFIT'
    exit_code = EXIT_USAGE

    def one_line(self):
        """Single-line rendering used on stderr by the CLI."""
        message = ' '.join(str(self).split())
        return f"error[{self.code}]: {message}"


class DomainError(RelifitError, ValueError):
    """An argument lies outside the domain of a model quantity."""

    code = 'E_DOMAIN'


class SchemaError(RelifitError, ValueError):
    """An input file does not match its expected schema."""

    code = 'E_SCHEMA'

    def __init__(self, message, row=None, path=None):
        location = []
        if path is not None:
            location.append(str(path))
        if row is not None:
            location.append(f"row {row}")
        prefix = f"{':'.join(location)}: " if location else ''
        super().__init__(f"{prefix}{message}")
        self.row = row
        self.path = path


class InfeasibleError(RelifitError):
    """The remaining-fault term of a model is not positive."""

    code = 'E_INFEASIBLE'
    exit_code = EXIT_FIT

    def __init__(self, message, index=None, bracket=None):
        super().__init__(message)
        self.index = index
        self.bracket = bracket


class UnsupportedModelError(RelifitError):
    """The requested operation is not defined for this model kind."""

    code = 'E_UNSUPPORTED'


class DegreesOfFreedomError(RelifitError, ValueError):
    """Too few intervals for the number of estimated parameters."""

    code = 'E_DOF'


class FitError(RelifitError):
    """The optimizer found no feasible parameter vector."""

    code = 'E_FIT'
    exit_code = EXIT_FIT


class UsageError(RelifitError):
    """Invalid or conflicting command-line flags."""

    code = 'E_USAGE'
