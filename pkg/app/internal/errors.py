"""
Exception hierarchy shared by every service.

Each error carries a human readable ``detail`` and the process ``exit_code``
the CLI should return for it, the same way an HTTP error carries its status.
"""
from typing import Optional


class StreamTsneError(Exception):
    """Base class for all library errors"""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __repr__(self) -> str:
        return f"{type(self).__name__}(detail={self.detail!r}, exit_code={self.exit_code})"


class ConfigurationError(StreamTsneError):
    """Invalid parameters, shapes or dimensions"""

    exit_code = 2


class DegenerateRowError(StreamTsneError):
    """A distance row with no usable spread; ``fallback`` holds uniform probabilities"""

    def __init__(self, detail: str, fallback=None):
        super().__init__(detail)
        self.fallback = fallback


class DivergenceError(StreamTsneError):
    """Non-finite values appeared during optimisation"""

    def __init__(self, detail: str, iteration: int):
        super().__init__(f"{detail} (iteration {iteration})")
        self.iteration = iteration


class EmbeddingStateError(StreamTsneError):
    """Operation not valid for the current embedding state"""


class ContractViolationError(StreamTsneError):
    """A caller broke an operation's precondition"""


class DegenerateClusterError(StreamTsneError):
    """Fewer than three effective points, or all collinear"""


class StreamParseError(StreamTsneError):
    """Malformed input row"""

    def __init__(self, detail: str, line_number: int):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class BaselineCapExceededError(StreamTsneError):
    """The full-refit baseline refuses datasets above its cap"""

    exit_code = 2
