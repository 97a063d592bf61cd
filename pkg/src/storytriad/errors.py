"""Typed error hierarchy shared across the engine, the analytics and the API.

Every error exposes a stable ``code`` (the class name) so the HTTP layer can
serialize rejections as ``{code, message, phase}`` without a mapping table.
"""

from __future__ import annotations


class StorytriadError(Exception):
    """Base class for all engine errors."""

    def __init__(self, message: str = "", *, phase: str | None = None):
        super().__init__(message or self.__class__.__name__)
        self.phase = phase

    @property
    def code(self) -> str:
        return type(self).__name__


# --- session lifecycle -------------------------------------------------------

class WrongPhase(StorytriadError):
    """Operation not allowed in the session's current phase."""


class WrongActor(StorytriadError):
    """Event submitted by a participant who does not own the current turn."""


class IllegalTransition(StorytriadError):
    """Event that no legal transition accepts in any phase context."""


class UnknownSession(StorytriadError):
    pass


class UnknownScenario(StorytriadError):
    pass


class UnknownParticipant(StorytriadError):
    pass


class UnknownJob(StorytriadError):
    pass


class RoleTaken(StorytriadError):
    pass


# --- narrative protocol ------------------------------------------------------

class OutOfRange(StorytriadError):
    pass


class MissingTemplate(StorytriadError):
    pass


class EmptyName(StorytriadError):
    pass


class InvalidInput(StorytriadError):
    pass


# --- character construction --------------------------------------------------

class UnsupportedMedia(StorytriadError):
    pass


class TooLarge(StorytriadError):
    pass


class NoSourceImage(StorytriadError):
    pass


class NoAvatar(StorytriadError):
    pass


class InvalidName(StorytriadError):
    pass


class UnconfirmedCharacter(StorytriadError):
    pass


# --- generation backends and pipeline ----------------------------------------

class WrongParagraphCount(StorytriadError):
    """Generated story text did not split into exactly four paragraphs.

    Also used as a *rejection value* by ``parse_story_response``, which returns
    (rather than raises) an instance so the caller can apply its retry policy.
    """

    def __init__(self, count: int, *, phase: str | None = None):
        super().__init__(f"expected 4 paragraphs, got {count}", phase=phase)
        self.count = count


class BackendFailure(StorytriadError):
    def __init__(self, kind: str, message: str = "", *, phase: str | None = None):
        super().__init__(message or kind, phase=phase)
        self.kind = kind


class Timeout(StorytriadError):
    pass


class RemoteError(StorytriadError):
    def __init__(self, status: int, message: str = "", *, phase: str | None = None):
        super().__init__(message or f"remote returned status {status}", phase=phase)
        self.status = status


class EmptyResponse(StorytriadError):
    pass


# --- persistence and export --------------------------------------------------

class StorageFull(StorytriadError):
    pass


class IoError(StorytriadError):
    pass


class MissingImage(StorytriadError):
    def __init__(self, content_address: str, *, phase: str | None = None):
        super().__init__(f"image blob not found: {content_address}", phase=phase)
        self.content_address = content_address


# --- analytics ---------------------------------------------------------------

class WrongItemCount(StorytriadError):
    pass


class LengthMismatch(StorytriadError):
    pass


class ZeroVariance(StorytriadError):
    pass


class TooFew(StorytriadError):
    pass


class InvalidDf(StorytriadError):
    pass


class DegenerateMatrix(StorytriadError):
    pass


class TooFewItems(StorytriadError):
    pass


class ParseError(StorytriadError):
    pass


class ParticipantMismatch(StorytriadError):
    pass


# --- service -----------------------------------------------------------------

class BindError(StorytriadError):
    pass


class ConfigError(StorytriadError):
    pass
