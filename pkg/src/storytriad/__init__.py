"""storytriad: a triadic collaborative-storytelling session engine.

Three players (protagonist, opportunity, challenge) co-author a four-chapter
story with generated text and illustrations; a companion analytics module
scores the workshop questionnaires around it.
"""

from .backends import (
    BackendDescriptor,
    ImageRequest,
    MockImageBackend,
    MockTextBackend,
    TextRequest,
    TraceInfo,
    generate_image,
    generate_text,
    stylize_avatar,
)
from .character import confirm_character, generate_avatar_image, ingest_source_image
from .export import build_story_document, export_story
from .images import BlobStore, ImageRef
from .pipeline import (
    GenerationContext,
    PromptSchema,
    build_illustration_requests,
    build_question_request,
    build_writing_request,
    generate_segment,
    parse_story_response,
    prompt_schema,
)
from .protocol import (
    ChapterSpec,
    DramaticStage,
    HopeComponent,
    Role,
    chapter_spec,
    render_inquiry,
    validate_player_input,
)
from .scenarios import Scenario, ScenarioRegistry
from .service import ServiceConfig, SessionService
from .session import (
    CharacterProfile,
    ChapterStep,
    EventKind,
    EventRecord,
    Participant,
    Session,
    SessionEvent,
    SessionPhase,
    Stage,
    StorySegment,
    apply_event,
    assign_role,
    create_session,
    current_turn,
    register_participant,
    replay_events,
    select_scenario,
)
from .storage import SessionStorage

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BlobStore",
    "ChapterSpec",
    "ChapterStep",
    "CharacterProfile",
    "DramaticStage",
    "EventKind",
    "EventRecord",
    "GenerationContext",
    "HopeComponent",
    "ImageRef",
    "ImageRequest",
    "MockImageBackend",
    "MockTextBackend",
    "Participant",
    "PromptSchema",
    "Role",
    "Scenario",
    "ScenarioRegistry",
    "ServiceConfig",
    "Session",
    "SessionEvent",
    "SessionPhase",
    "SessionService",
    "SessionStorage",
    "Stage",
    "StorySegment",
    "TextRequest",
    "TraceInfo",
    "apply_event",
    "assign_role",
    "build_illustration_requests",
    "build_question_request",
    "build_story_document",
    "build_writing_request",
    "chapter_spec",
    "confirm_character",
    "create_session",
    "current_turn",
    "export_story",
    "generate_avatar_image",
    "generate_image",
    "generate_segment",
    "generate_text",
    "ingest_source_image",
    "parse_story_response",
    "prompt_schema",
    "register_participant",
    "render_inquiry",
    "replay_events",
    "select_scenario",
    "stylize_avatar",
    "validate_player_input",
]
