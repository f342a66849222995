"""Exception hierarchy. Each class carries the process exit code the CLI maps it to."""


class PiezoBeamError(Exception):
    exit_code = 1


class ConfigError(PiezoBeamError, ValueError):
    """Bad configuration or precondition (exit code 2)."""

    exit_code = 2


class ValidationError(ConfigError):
    """A physical parameter violates its admissible range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class AssemblyError(PiezoBeamError):
    """Assembled operators violate a structural invariant (exit code 3)."""

    exit_code = 3


class NumericalError(PiezoBeamError):
    """Linear solve or eigensolve failure (exit code 4)."""

    exit_code = 4
