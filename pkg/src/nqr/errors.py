"""Exception types shared across the library."""


class NqrError(Exception):
    """Base class for all library errors."""


class ValidationError(NqrError):
    """Input or record violates a documented invariant."""


class ParseError(NqrError):
    """Malformed serialized data (carries the offending line when known)."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class IntegrityError(NqrError):
    """Cross-record consistency failure, e.g. duplicate ids."""


class NotFoundError(NqrError):
    """Requested id/slot/resource does not exist."""


class CapacityError(NqrError):
    """Sequence exceeds a backend context window."""

    def __init__(self, message: str, limit: int | None = None):
        super().__init__(message)
        self.limit = limit


class CapabilityError(NqrError):
    """Backend does not support the requested operation."""


class TransportError(NqrError):
    """Remote call failed after retries."""

    def __init__(self, message: str, attempts: int = 1, retryable: bool = True):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


class UnsupportedPromptError(NqrError):
    """A stub chat backend received a prompt shape it has no response for."""


class ExtractionError(NqrError):
    """Structured content could not be extracted from a model response."""


class StageError(NqrError):
    """A pipeline stage was invoked before its input artifacts exist."""

    def __init__(self, message: str, missing_artifact: str):
        super().__init__(f"{message} (missing artifact: {missing_artifact})")
        self.missing_artifact = missing_artifact
