"""Event-sourced session lifecycle: one triad's run from setup to export.

The session is a state machine driven exclusively through ``apply_event``.
Every accepted event appends a record to the session's log; replaying the log
against a fresh shell reconstructs an equivalent session, which is what the
on-disk loader does. Rejected events raise typed errors and leave the session
untouched (all guards run before any mutation).

Phase graph::

    setup -> role_assignment -> character_construction
          -> chapter 1..4 (inquiry -> awaiting_input -> generating -> review)
          -> presentation -> closed

Within a chapter, review may loop back to generating (regeneration) and a
failed generation drops back to awaiting_input; across major stages the
session only ever moves forward.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping

from .errors import (
    IllegalTransition,
    InvalidInput,
    InvalidName,
    NoAvatar,
    NoSourceImage,
    RoleTaken,
    UnknownParticipant,
    WrongActor,
    WrongPhase,
)
from .images import ImageRef
from .protocol import (
    CHAPTER_COUNT,
    Role,
    owning_role,
    validate_player_input,
)
from .scenarios import Scenario

Clock = Callable[[], float]

MAX_NAME_CHARS = 40


# --- phases -------------------------------------------------------------------

class Stage(str, Enum):
    SETUP = "setup"
    ROLE_ASSIGNMENT = "role_assignment"
    CHARACTER_CONSTRUCTION = "character_construction"
    CHAPTER = "chapter"
    PRESENTATION = "presentation"
    CLOSED = "closed"


class ChapterStep(str, Enum):
    INQUIRY = "inquiry"
    AWAITING_INPUT = "awaiting_input"
    GENERATING = "generating"
    REVIEW = "review"


_STEP_ORDER = {
    ChapterStep.INQUIRY: 0,
    ChapterStep.AWAITING_INPUT: 1,
    ChapterStep.GENERATING: 2,
    ChapterStep.REVIEW: 3,
}


@dataclass(frozen=True)
class SessionPhase:
    stage: Stage
    chapter: int | None = None
    step: ChapterStep | None = None

    @classmethod
    def setup(cls) -> "SessionPhase":
        return cls(Stage.SETUP)

    @classmethod
    def in_chapter(cls, chapter: int, step: ChapterStep) -> "SessionPhase":
        if not 1 <= chapter <= CHAPTER_COUNT:
            raise IllegalTransition(f"chapter index out of range: {chapter}")
        return cls(Stage.CHAPTER, chapter, step)

    @property
    def is_chapter(self) -> bool:
        return self.stage is Stage.CHAPTER

    def major_rank(self) -> int:
        """Order of major stages; chapter sub-steps share their chapter's rank.

        Used by the monotonicity invariant: sub-steps may legally cycle
        (regeneration, failed generation), major stages never move backward.
        """
        if self.stage is Stage.SETUP:
            return 0
        if self.stage is Stage.ROLE_ASSIGNMENT:
            return 1
        if self.stage is Stage.CHARACTER_CONSTRUCTION:
            return 2
        if self.stage is Stage.CHAPTER:
            return 2 + (self.chapter or 0)
        if self.stage is Stage.PRESENTATION:
            return 3 + CHAPTER_COUNT
        return 4 + CHAPTER_COUNT

    def encode(self) -> str:
        if self.is_chapter:
            return f"chapter_{self.chapter}:{self.step.value}"  # type: ignore[union-attr]
        return self.stage.value

    @classmethod
    def parse(cls, text: str) -> "SessionPhase":
        if text.startswith("chapter_"):
            head, _, step = text.partition(":")
            return cls.in_chapter(int(head.removeprefix("chapter_")), ChapterStep(step))
        return cls(Stage(text))

    def __str__(self) -> str:
        return self.encode()


# --- events -------------------------------------------------------------------

class EventKind(str, Enum):
    CREATED = "created"
    SCENARIO_SELECTED = "scenario_selected"
    PARTICIPANT_REGISTERED = "participant_registered"
    ROLE_ASSIGNED = "role_assigned"
    SOURCE_INGESTED = "source_ingested"
    AVATAR_GENERATED = "avatar_generated"
    CHARACTER_CONFIRMED = "character_confirmed"
    INQUIRY_PRESENTED = "inquiry_presented"
    INPUT_SUBMITTED = "input_submitted"
    SEGMENT_COMMITTED = "segment_committed"
    GENERATION_FAILED = "generation_failed"
    SEGMENT_ACCEPTED = "segment_accepted"
    REGENERATION_REQUESTED = "regeneration_requested"
    SESSION_CLOSED = "session_closed"


@dataclass(frozen=True)
class SessionEvent:
    kind: EventKind
    payload: Mapping = field(default_factory=dict)


@dataclass(frozen=True)
class EventRecord:
    seq: int
    timestamp: float
    actor: str
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "event": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EventRecord":
        return cls(
            seq=int(data["seq"]),
            timestamp=float(data["timestamp"]),
            actor=str(data["actor"]),
            kind=str(data["event"]),
            payload=dict(data["payload"]),
        )


SYSTEM_ACTOR = "system"


# --- record types -------------------------------------------------------------

@dataclass
class Participant:
    id: str
    display_name: str
    role: Role | None = None
    is_facilitator: bool = False

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "role": self.role.value if self.role else None,
            "is_facilitator": self.is_facilitator,
        }


@dataclass
class CharacterProfile:
    """The protagonist's visual and nominal identity.

    ``style_tokens`` is fixed once set and anchors illustration consistency:
    every later image request carries the avatar plus these tokens.
    """

    name: str = ""
    source_image: ImageRef | None = None
    avatar: ImageRef | None = None
    style_tokens: str = ""
    confirmed: bool = False

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "source_image": self.source_image.to_dict() if self.source_image else None,
            "avatar": self.avatar.to_dict() if self.avatar else None,
            "style_tokens": self.style_tokens,
            "confirmed": self.confirmed,
        }


@dataclass(frozen=True)
class GenerationMeta:
    backend_id: str
    duration_ms: int
    regenerations: int

    def to_dict(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "duration_ms": self.duration_ms,
            "regenerations": self.regenerations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenerationMeta":
        return cls(
            backend_id=str(data["backend_id"]),
            duration_ms=int(data["duration_ms"]),
            regenerations=int(data["regenerations"]),
        )


@dataclass(frozen=True)
class StorySegment:
    """One chapter's accepted output: four paragraphs, four illustrations."""

    chapter_index: int
    player_input: str
    paragraphs: tuple[str, ...]
    illustrations: tuple[ImageRef, ...]
    meta: GenerationMeta

    def to_dict(self) -> dict:
        return {
            "chapter_index": self.chapter_index,
            "player_input": self.player_input,
            "paragraphs": list(self.paragraphs),
            "illustrations": [ref.to_dict() for ref in self.illustrations],
            "generation_meta": self.meta.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StorySegment":
        return cls(
            chapter_index=int(data["chapter_index"]),
            player_input=str(data["player_input"]),
            paragraphs=tuple(str(p) for p in data["paragraphs"]),
            illustrations=tuple(ImageRef.from_dict(d) for d in data["illustrations"]),
            meta=GenerationMeta.from_dict(data["generation_meta"]),
        )


# --- the session --------------------------------------------------------------

@dataclass
class Session:
    id: str
    phase: SessionPhase = field(default_factory=SessionPhase.setup)
    scenario: Scenario | None = None
    participants: list[Participant] = field(default_factory=list)
    character: CharacterProfile | None = None
    segments: dict[int, StorySegment] = field(default_factory=dict)
    created_at: float = 0.0
    updated_at: float = 0.0
    event_log: list[EventRecord] = field(default_factory=list)
    # bookkeeping derived purely from events (reconstructed on replay)
    current_inquiry: str | None = None
    chapter_inputs: dict[int, str] = field(default_factory=dict)
    regen_counts: dict[int, int] = field(default_factory=dict)

    def participant(self, participant_id: str) -> Participant | None:
        for p in self.participants:
            if p.id == participant_id:
                return p
        return None

    def role_holder(self, role: Role) -> Participant | None:
        for p in self.participants:
            if p.role is role:
                return p
        return None

    def roles_held(self) -> set[Role]:
        return {p.role for p in self.participants if p.role is not None}

    def next_seq(self) -> int:
        return self.event_log[-1].seq + 1 if self.event_log else 0

    def to_state_dict(self, include_log: bool = True) -> dict:
        state = {
            "id": self.id,
            "phase": self.phase.encode(),
            "scenario": self.scenario.to_dict() if self.scenario else None,
            "participants": [p.to_dict() for p in self.participants],
            "character": self.character.to_dict() if self.character else None,
            "segments": {str(k): seg.to_dict() for k, seg in sorted(self.segments.items())},
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "current_inquiry": self.current_inquiry,
            "chapter_inputs": {str(k): v for k, v in sorted(self.chapter_inputs.items())},
            "regen_counts": {str(k): v for k, v in sorted(self.regen_counts.items())},
        }
        if include_log:
            state["event_log"] = [rec.to_dict() for rec in self.event_log]
        return state


def _shell(session_id: str) -> Session:
    return Session(id=session_id)


def create_session(
    *, clock: Clock = time.time, session_id: str | None = None, actor: str = SYSTEM_ACTOR
) -> Session:
    """Fresh session in setup phase whose log holds exactly one created entry."""
    sid = session_id or uuid.uuid4().hex
    session = _shell(sid)
    apply_event(
        session, actor, SessionEvent(EventKind.CREATED, {"session_id": sid}), clock=clock
    )
    return session


# --- transition guards ---------------------------------------------------------

def _require_phase(session: Session, ok: bool, detail: str) -> None:
    if not ok:
        raise WrongPhase(
            f"{detail} (phase is {session.phase.encode()})", phase=session.phase.encode()
        )


def _require_chapter_step(session: Session, payload: Mapping, step: ChapterStep) -> int:
    chapter = int(payload.get("chapter", -1))
    phase = session.phase
    _require_phase(
        session,
        phase.is_chapter and phase.step is step and phase.chapter == chapter,
        f"event targets chapter {chapter} at step {step.value}",
    )
    return chapter


def _require_role_holder(session: Session, actor: str) -> Participant:
    participant = session.participant(actor)
    if participant is None or participant.role is None:
        raise WrongActor(
            f"actor {actor!r} holds no role in this session", phase=session.phase.encode()
        )
    return participant


def _segment_from_payload(session: Session, chapter: int, payload: Mapping) -> StorySegment:
    try:
        segment = StorySegment.from_dict(dict(payload["segment"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise IllegalTransition(f"malformed segment payload: {exc}") from None
    if segment.chapter_index != chapter:
        raise IllegalTransition(
            f"segment chapter_index {segment.chapter_index} does not match chapter {chapter}"
        )
    if len(segment.paragraphs) != 4 or any(not p.strip() for p in segment.paragraphs):
        raise IllegalTransition("segment must carry exactly 4 non-empty paragraphs")
    if len(segment.illustrations) != 4:
        raise IllegalTransition("segment must carry exactly 4 illustrations")
    expected = set(range(1, chapter))
    if set(session.segments) != expected:
        raise IllegalTransition(
            f"segments {sorted(session.segments)} are not the prefix {sorted(expected)}"
        )
    return segment


# --- the transition function ---------------------------------------------------

def apply_event(
    session: Session,
    actor: str,
    event: SessionEvent,
    *,
    clock: Clock = time.time,
    timestamp: float | None = None,
) -> Session:
    """Apply one event to the session, mutating it on success.

    All guards run before any mutation, so a raised rejection (WrongPhase,
    WrongActor, IllegalTransition, ...) leaves the session exactly as it was.
    ``timestamp`` is only supplied when replaying a persisted log; live calls
    take the clock's time. Identical (session, actor, event) inputs always
    produce identical successors apart from these timestamps.
    """
    kind = event.kind
    payload = event.payload
    mutate: Callable[[], None]

    if kind is EventKind.CREATED:
        if session.event_log:
            raise IllegalTransition("created must be the first event")

        def mutate() -> None:
            pass

    elif kind is EventKind.SCENARIO_SELECTED:
        _require_phase(session, session.phase.stage is Stage.SETUP, "scenario selection")
        try:
            scenario = Scenario.from_dict(dict(payload["scenario"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise IllegalTransition(f"malformed scenario payload: {exc}") from None

        def mutate() -> None:
            session.scenario = scenario
            session.phase = SessionPhase(Stage.ROLE_ASSIGNMENT)

    elif kind is EventKind.PARTICIPANT_REGISTERED:
        _require_phase(
            session,
            session.phase.stage in (Stage.SETUP, Stage.ROLE_ASSIGNMENT),
            "participant registration",
        )
        pid = str(payload.get("participant_id", ""))
        if not pid:
            raise IllegalTransition("participant_id is required")
        if session.participant(pid) is not None:
            raise IllegalTransition(f"participant {pid!r} already registered")
        participant = Participant(
            id=pid,
            display_name=str(payload.get("display_name", pid)),
            is_facilitator=bool(payload.get("is_facilitator", False)),
        )

        def mutate() -> None:
            session.participants.append(participant)

    elif kind is EventKind.ROLE_ASSIGNED:
        _require_phase(
            session, session.phase.stage is Stage.ROLE_ASSIGNMENT, "role assignment"
        )
        pid = str(payload.get("participant_id", ""))
        participant = session.participant(pid)
        if participant is None:
            raise UnknownParticipant(
                f"participant {pid!r} is not registered", phase=session.phase.encode()
            )
        try:
            role = Role(payload["role"])
        except (KeyError, ValueError) as exc:
            raise IllegalTransition(f"malformed role payload: {exc}") from None
        holder = session.role_holder(role)
        if holder is not None:
            raise RoleTaken(
                f"role {role.value} already held by {holder.id}",
                phase=session.phase.encode(),
            )
        if participant.role is not None:
            raise IllegalTransition(
                f"participant {pid!r} already holds role {participant.role.value}"
            )

        def mutate() -> None:
            participant.role = role
            if session.roles_held() == set(Role):
                session.phase = SessionPhase(Stage.CHARACTER_CONSTRUCTION)

    elif kind is EventKind.SOURCE_INGESTED:
        _require_phase(
            session,
            session.phase.stage is Stage.CHARACTER_CONSTRUCTION,
            "source image ingestion",
        )
        try:
            ref = ImageRef.from_dict(dict(payload["image"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise IllegalTransition(f"malformed image payload: {exc}") from None
        style_tokens = str(payload.get("style_tokens", ""))

        def mutate() -> None:
            profile = session.character or CharacterProfile()
            profile.source_image = ref
            profile.avatar = None  # a new source invalidates any previous avatar
            if style_tokens:
                profile.style_tokens = style_tokens
            session.character = profile

    elif kind is EventKind.AVATAR_GENERATED:
        _require_phase(
            session,
            session.phase.stage is Stage.CHARACTER_CONSTRUCTION,
            "avatar generation",
        )
        if session.character is None or session.character.source_image is None:
            raise NoSourceImage(
                "no source image ingested for this session", phase=session.phase.encode()
            )
        try:
            ref = ImageRef.from_dict(dict(payload["image"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise IllegalTransition(f"malformed image payload: {exc}") from None

        def mutate() -> None:
            session.character.avatar = ref  # type: ignore[union-attr]

    elif kind is EventKind.CHARACTER_CONFIRMED:
        _require_phase(
            session,
            session.phase.stage is Stage.CHARACTER_CONSTRUCTION,
            "character confirmation",
        )
        if session.character is None or session.character.avatar is None:
            raise NoAvatar("no avatar generated yet", phase=session.phase.encode())
        name = str(payload.get("name", "")).strip()
        if not name or len(name) > MAX_NAME_CHARS or "{" in name or "}" in name:
            raise InvalidName(
                f"name must be 1..{MAX_NAME_CHARS} chars without braces",
                phase=session.phase.encode(),
            )

        def mutate() -> None:
            session.character.name = name  # type: ignore[union-attr]
            session.character.confirmed = True  # type: ignore[union-attr]
            session.phase = SessionPhase.in_chapter(1, ChapterStep.INQUIRY)

    elif kind is EventKind.INQUIRY_PRESENTED:
        chapter = _require_chapter_step(session, payload, ChapterStep.INQUIRY)
        inquiry = str(payload.get("inquiry", ""))
        if not inquiry.strip():
            raise IllegalTransition("inquiry text must be non-empty")

        def mutate() -> None:
            session.current_inquiry = inquiry
            session.phase = SessionPhase.in_chapter(chapter, ChapterStep.AWAITING_INPUT)

    elif kind is EventKind.INPUT_SUBMITTED:
        chapter = _require_chapter_step(session, payload, ChapterStep.AWAITING_INPUT)
        participant = _require_role_holder(session, actor)
        owner = owning_role(chapter)
        if participant.role is not owner:
            raise WrongActor(
                f"chapter {chapter} input belongs to the {owner.value} role, "
                f"not {participant.role.value}",  # type: ignore[union-attr]
                phase=session.phase.encode(),
            )
        check = validate_player_input(str(payload.get("text", "")))
        if not check.ok:
            raise InvalidInput(
                f"player input rejected: {check.reason}", phase=session.phase.encode()
            )

        def mutate() -> None:
            session.chapter_inputs[chapter] = check.text
            session.phase = SessionPhase.in_chapter(chapter, ChapterStep.GENERATING)

    elif kind is EventKind.SEGMENT_COMMITTED:
        chapter = _require_chapter_step(session, payload, ChapterStep.GENERATING)
        segment = _segment_from_payload(session, chapter, payload)

        def mutate() -> None:
            session.segments[chapter] = segment
            session.phase = SessionPhase.in_chapter(chapter, ChapterStep.REVIEW)

    elif kind is EventKind.GENERATION_FAILED:
        chapter = _require_chapter_step(session, payload, ChapterStep.GENERATING)

        def mutate() -> None:
            session.phase = SessionPhase.in_chapter(chapter, ChapterStep.AWAITING_INPUT)

    elif kind is EventKind.SEGMENT_ACCEPTED:
        chapter = _require_chapter_step(session, payload, ChapterStep.REVIEW)
        _require_role_holder(session, actor)

        def mutate() -> None:
            session.current_inquiry = None
            if chapter < CHAPTER_COUNT:
                session.phase = SessionPhase.in_chapter(chapter + 1, ChapterStep.INQUIRY)
            else:
                session.phase = SessionPhase(Stage.PRESENTATION)

    elif kind is EventKind.REGENERATION_REQUESTED:
        chapter = _require_chapter_step(session, payload, ChapterStep.REVIEW)
        _require_role_holder(session, actor)

        def mutate() -> None:
            session.segments.pop(chapter, None)
            session.regen_counts[chapter] = session.regen_counts.get(chapter, 0) + 1
            session.phase = SessionPhase.in_chapter(chapter, ChapterStep.GENERATING)

    elif kind is EventKind.SESSION_CLOSED:
        _require_phase(
            session, session.phase.stage is Stage.PRESENTATION, "closing the session"
        )

        def mutate() -> None:
            session.phase = SessionPhase(Stage.CLOSED)

    else:  # pragma: no cover - enum is exhaustive
        raise IllegalTransition(f"unknown event kind {kind!r}")

    ts = timestamp if timestamp is not None else clock()
    record = EventRecord(
        seq=session.next_seq(),
        timestamp=ts,
        actor=actor,
        kind=kind.value,
        payload=dict(payload),
    )
    mutate()
    if not session.event_log:
        session.created_at = ts
    session.updated_at = ts
    session.event_log.append(record)
    return session


# --- spec-level operations ------------------------------------------------------

def select_scenario(
    session: Session,
    scenario: Scenario,
    *,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> Session:
    return apply_event(
        session,
        actor,
        SessionEvent(EventKind.SCENARIO_SELECTED, {"scenario": scenario.to_dict()}),
        clock=clock,
    )


def register_participant(
    session: Session,
    participant_id: str,
    display_name: str,
    *,
    is_facilitator: bool = False,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> Session:
    return apply_event(
        session,
        actor,
        SessionEvent(
            EventKind.PARTICIPANT_REGISTERED,
            {
                "participant_id": participant_id,
                "display_name": display_name,
                "is_facilitator": is_facilitator,
            },
        ),
        clock=clock,
    )


def assign_role(
    session: Session,
    participant_id: str,
    role: Role,
    *,
    actor: str = SYSTEM_ACTOR,
    clock: Clock = time.time,
) -> Session:
    return apply_event(
        session,
        actor,
        SessionEvent(
            EventKind.ROLE_ASSIGNED, {"participant_id": participant_id, "role": role.value}
        ),
        clock=clock,
    )


def current_turn(session: Session) -> Role:
    """The role whose input the current chapter is waiting on."""
    phase = session.phase
    if not (phase.is_chapter and phase.step is ChapterStep.AWAITING_INPUT):
        raise WrongPhase(
            f"no turn to take in phase {phase.encode()}", phase=phase.encode()
        )
    return owning_role(phase.chapter)  # type: ignore[arg-type]


def replay_events(records: Iterable[EventRecord]) -> Session:
    """Rebuild a session from its persisted event log."""
    records = list(records)
    if not records or records[0].kind != EventKind.CREATED.value:
        raise IllegalTransition("event log must start with a created record")
    session = _shell(str(records[0].payload["session_id"]))
    for record in records:
        expected_seq = session.next_seq()
        if record.seq != expected_seq:
            raise IllegalTransition(
                f"event log gap: expected seq {expected_seq}, found {record.seq}"
            )
        apply_event(
            session,
            record.actor,
            SessionEvent(EventKind(record.kind), record.payload),
            timestamp=record.timestamp,
        )
    return session
