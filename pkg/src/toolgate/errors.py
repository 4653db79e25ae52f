"""Exception hierarchy shared across the package."""


class ToolgateError(Exception):
    """Base class for all package errors."""


# --- protocol ---

class ParseError(ToolgateError):
    """A line on the wire could not be parsed into a message.

    Carries the offending line verbatim in ``line``.
    """

    def __init__(self, reason: str, line: str):
        super().__init__(f"{reason}: {line!r}")
        self.reason = reason
        self.line = line


class TransportError(ToolgateError):
    """Stream or process level failure (broken pipe, dead child, timeout)."""


class SpawnError(ToolgateError):
    """Child process could not be started."""


class HandshakeTimeout(ToolgateError):
    """Server did not answer initialize within the deadline."""


class ToolNotFound(ToolgateError):
    """Requested tool does not exist on the target server."""


class ToolErrorResult(ToolgateError):
    """The server executed the tool and reported a semantic error result."""


# --- catalog ---

class ConfigError(ToolgateError):
    """Fleet configuration failed validation."""


class EmptyCatalog(ToolgateError):
    """No ready server contributed any tool."""


class VersionMismatch(ToolgateError):
    """Persisted catalog was written with an incompatible format version."""


# --- retrieval ---

class QueryFormatError(ToolgateError):
    """Route query missing the tag block or one of its lines.

    ``missing`` is one of "block", "server", "tool".
    """

    def __init__(self, missing: str):
        super().__init__(f"route query missing {missing}")
        self.missing = missing


class DimensionMismatch(ToolgateError):
    """Embedding vectors of different dimensions were compared."""


# --- copilot ---

class NotFound(ToolgateError):
    """Execute request named a server/tool absent from the catalog.

    ``hint`` carries the nearest catalog name by edit distance, if any.
    """

    def __init__(self, message: str, hint: str | None = None):
        super().__init__(message)
        self.hint = hint


class TransportExhausted(ToolgateError):
    """All retry attempts failed at the transport level."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class BindError(ToolgateError):
    """Gateway could not start serving."""


# --- agent / eval ---

class BackendError(ToolgateError):
    """Chat backend failed (after retries) or script exhausted."""


class UnparseableResponse(ToolgateError):
    """Model output could not be parsed into a key-point list."""


class UnparseableVerdict(ToolgateError):
    """Judge output did not contain a binary status line."""


class MissingJudgment(ToolgateError):
    """Some tasks have no matching judgment."""

    def __init__(self, task_ids):
        super().__init__(f"missing judgments for: {sorted(task_ids)}")
        self.task_ids = set(task_ids)


class CoverageMismatch(ToolgateError):
    """Judge and human label sets do not cover the same tasks."""
