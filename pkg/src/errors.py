"""
Exception types for the SBP engine.
Input problems derive from ValueError, run-time protocol problems from RuntimeError.
"""


class SbpError(Exception):
    """Base class for all engine errors"""


class GraphFormatError(SbpError, ValueError):
    """Malformed line in an edge list, truth file or manifest"""

    def __init__(self, message: str, line_number: int = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class GraphInputError(SbpError, ValueError):
    """Well-formed input that cannot be used (negative ids, bad sizes, length mismatch)"""


class InvalidOperationError(SbpError, ValueError):
    """Blockmodel operation that violates its preconditions"""


class ProtocolError(SbpError, RuntimeError):
    """Collective-call mismatch, broken frame or duplicate move record"""


class CollectiveTimeoutError(ProtocolError):
    """A collective did not complete in time (likely a deadlock)"""


class ReplicaDivergenceError(SbpError, RuntimeError):
    """Blockmodel replicas disagree after a sync point"""

    def __init__(self, message: str, cell=None, ranks=None):
        self.cell = cell
        self.ranks = ranks
        super().__init__(message)
