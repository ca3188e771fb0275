"""Exception hierarchy shared across the simulator."""


class FlipsimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(FlipsimError):
    """Invalid configuration value or unknown scene/solver name."""


class SolverError(FlipsimError):
    """Pressure solve failed; carries diagnostics in the message."""


class SingularSystemError(SolverError):
    """A pressure row has a zero diagonal."""

    def __init__(self, cell: int):
        self.cell = cell
        super().__init__(f"singular pressure system: zero diagonal at cell {cell}")


class SolverBreakdownError(SolverError):
    """Conjugate-gradient direction curvature vanished."""


class SnapshotFormatError(FlipsimError):
    """Particle snapshot file does not parse; names the failing byte offset."""

    def __init__(self, path, offset: int, reason: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: bad snapshot at byte {offset}: {reason}")
