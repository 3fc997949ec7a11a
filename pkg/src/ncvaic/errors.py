"""Exception hierarchy. Every error raised on purpose derives from NcvaicError."""


class NcvaicError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "error"


class DomainError(NcvaicError, ValueError):
    code = "domain_error"


class ConditioningError(NcvaicError, ValueError):
    code = "conditioning_error"

    def __init__(self, message, rcond=None):
        super().__init__(message)
        self.rcond = rcond


class UnboundedProblemError(NcvaicError, ValueError):
    code = "unbounded_problem"


class UnsupportedRegimeError(NcvaicError, ValueError):
    code = "unsupported_regime"


class InsufficientDataError(NcvaicError, RuntimeError):
    code = "insufficient_data"


class SelectionError(NcvaicError, RuntimeError):
    code = "selection_failed"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class DataParseError(NcvaicError, ValueError):
    code = "parse_error"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(NcvaicError, ValueError):
    code = "config_error"
