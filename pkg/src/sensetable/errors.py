"""Exception types raised by the engine."""


class EngineError(Exception):
    """Base class for all engine errors."""


class EmptyDocument(EngineError):
    """The HTML document contains no text-bearing blocks."""


class MalformedUrl(EngineError):
    """The supplied URL is not absolute."""


class ProviderUnavailable(EngineError):
    """An external provider (entities, suggestions, embeddings) cannot be reached."""


class EmptySelection(EngineError):
    """Manual capture received empty text."""


class MalformedEvent(EngineError):
    """A signal event is missing a field required for its kind."""


class UnqualifiedEvent(EngineError):
    """Attempted to score a disqualified event."""


class InvalidPartition(EngineError):
    """A split partition does not cover the group members exactly."""


class UnknownGroup(EngineError):
    """Referenced criterion group does not exist or is deleted."""


class InvalidCount(EngineError):
    """Visible count must be at least 1."""


class UnknownTarget(EngineError):
    """Referenced option/criterion/snippet does not exist."""


class UnknownSnippet(UnknownTarget):
    """Referenced evidence snippet does not exist."""


class UnknownSession(EngineError):
    """Referenced session does not exist."""


class SchemaViolation(EngineError):
    """A wire payload does not match its schema."""


class TraceParseError(EngineError):
    """A replay trace line could not be parsed."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CorruptLog(EngineError):
    """A persisted log record failed its checksum."""
