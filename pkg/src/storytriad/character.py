"""Character construction: selfie or sketch in, stylized avatar out.

The confirmed profile (name + avatar + style tokens) anchors the story's
visual and nominal identity; after confirmation the phase moves on, which is
what makes the profile immutable: every mutating event requires the
character-construction phase.

Privacy: the source selfie stays inside the session's blob store and never
appears in exports; only the stylized avatar travels with the story.
"""

from __future__ import annotations

import time

from .backends import TraceInfo, stylize_avatar
from .errors import NoSourceImage, TooLarge, WrongPhase
from .images import BlobStore, ImageRef
from .session import (
    Clock,
    EventKind,
    Session,
    SessionEvent,
    Stage,
    SYSTEM_ACTOR,
    apply_event,
)

MAX_SOURCE_BYTES = 10 * 1024 * 1024

DEFAULT_STYLE_TOKENS = (
    "storybook watercolor illustration, soft warm palette, clean linework, "
    "consistent character design"
)


def ingest_source_image(
    session: Session,
    data: bytes,
    media_type: str | None = None,
    *,
    store: BlobStore,
    style_tokens: str = DEFAULT_STYLE_TOKENS,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> ImageRef:
    """Store the uploaded selfie/sketch and record it as the candidate source."""
    if session.phase.stage is not Stage.CHARACTER_CONSTRUCTION:
        raise WrongPhase(
            f"source upload only during character construction "
            f"(phase is {session.phase.encode()})",
            phase=session.phase.encode(),
        )
    if len(data) > MAX_SOURCE_BYTES:
        raise TooLarge(
            f"source image is {len(data)} bytes; limit is {MAX_SOURCE_BYTES}",
            phase=session.phase.encode(),
        )
    ref = store.put(data, media_type)  # raises UnsupportedMedia on bad bytes
    apply_event(
        session,
        actor,
        SessionEvent(
            EventKind.SOURCE_INGESTED,
            {"image": ref.to_dict(), "style_tokens": style_tokens},
        ),
        clock=clock,
    )
    return ref


def generate_avatar_image(
    session: Session,
    *,
    image_backend,
    store: BlobStore,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> ImageRef:
    """Stylize the candidate source into an avatar and record it (re-rollable).

    This is the synchronous core; the service wraps it in an async job.
    """
    profile = session.character
    if profile is None or profile.source_image is None:
        raise NoSourceImage(
            "ingest a source image before generating an avatar",
            phase=session.phase.encode(),
        )
    ref = stylize_avatar(
        image_backend,
        profile.source_image,
        profile.style_tokens,
        store,
        trace=TraceInfo(session.id, 0, "avatar"),
    )
    apply_event(
        session,
        actor,
        SessionEvent(EventKind.AVATAR_GENERATED, {"image": ref.to_dict()}),
        clock=clock,
    )
    return ref


def confirm_character(
    session: Session,
    name: str,
    *,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> Session:
    """Fix the group-confirmed name and advance to chapter 1."""
    return apply_event(
        session,
        actor,
        SessionEvent(EventKind.CHARACTER_CONFIRMED, {"name": name}),
        clock=clock,
    )
