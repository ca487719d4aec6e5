"""Exception types shared across the pipeline."""


class TriggerForgeError(Exception):
    """Base class for all tool errors."""


class ParseError(TriggerForgeError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}" if line else message)


class UnsupportedFeature(TriggerForgeError):
    """Input uses a construct outside the supported SMT-LIB subset."""


class SolverUnavailable(TriggerForgeError):
    """No usable SMT solver command could be resolved."""


class SolverCrashed(TriggerForgeError):
    """The solver process died, was killed by the watchdog, or produced
    garbled output."""


class ProtocolError(TriggerForgeError):
    """The solver answered something the bridge cannot interpret."""


class NoPatternFound(TriggerForgeError):
    """No admissible pattern exists for a quantified conjunct."""


class IncompleteModel(TriggerForgeError):
    """The solver model lacks an assignment for a required variable."""
