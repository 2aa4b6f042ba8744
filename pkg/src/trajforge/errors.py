"""Exception hierarchy shared across the toolkit."""


class TrajforgeError(Exception):
    """Base class for all toolkit errors."""


# --- agent text protocol ---------------------------------------------------


class ProtocolError(TrajforgeError):
    """A model reply does not follow the thought/action protocol."""


class MalformedAction(ProtocolError):
    pass


class MissingThought(ProtocolError):
    pass


class MissingAction(ProtocolError):
    pass


class ProtocolViolation(TrajforgeError):
    """Raised by the policy after the reprompt attempt also failed to parse."""

    def __init__(self, message: str, cause: ProtocolError | None = None):
        super().__init__(message)
        self.cause = cause


# --- environment -------------------------------------------------------------


class UnknownSite(TrajforgeError):
    pass


class InvalidElement(TrajforgeError):
    pass


class UnknownQuery(TrajforgeError):
    pass


class ReplayMismatch(TrajforgeError):
    pass


# --- backends ----------------------------------------------------------------


class BackendUnavailable(TrajforgeError):
    """Transport failure talking to a model endpoint (retryable)."""


class ScriptMiss(TrajforgeError):
    """A scripted backend has no entry for the request."""

    def __init__(self, key: dict):
        super().__init__(f"no scripted reply matches {key!r}")
        self.key = key


# --- curation stages ---------------------------------------------------------


class JudgeUnavailable(TrajforgeError):
    pass


class UnparseableVerdict(TrajforgeError):
    pass


class EmptyVerbalization(TrajforgeError):
    pass


class NoValidCandidate(TrajforgeError):
    pass


class NoAlternative(TrajforgeError):
    pass


class WrongRecoveryAction(TrajforgeError):
    pass


class EmptySite(TrajforgeError):
    pass


class ConfigError(TrajforgeError):
    """Invalid pipeline configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
