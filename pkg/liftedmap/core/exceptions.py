"""
Error hierarchy
Every error carries the exit code the CLI reports for it
"""


class LiftedMapError(Exception):
    """Base class for all engine errors"""

    exit_code: int = 4


class ContractViolation(LiftedMapError, ValueError):
    """A caller broke an operation's precondition (shapes, ranges, nesting)"""

    exit_code = 2


class EnumerationCapExceeded(ContractViolation):
    """Brute-force enumeration would exceed the configured cap"""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(
            f"Refusing to enumerate {size} assignments: BRUTE_FORCE_CAP is {cap}"
        )


class ScheduleError(ContractViolation):
    """Refinement schedule is not monotonically finer"""


class ConfigError(LiftedMapError):
    """Invalid run configuration"""

    exit_code = 2


class InputError(LiftedMapError):
    """Unreadable or malformed input file"""

    exit_code = 3


class InvariantViolation(LiftedMapError):
    """An internal invariant (energy hand-off, trace monotonicity) failed"""

    exit_code = 4
