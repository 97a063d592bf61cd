"""Per-chapter orchestration of the three agents: questioning, writing, drawing.

Each chapter runs the same loop: render (or generate) the narrator's question,
collect the owning player's input, expand it into exactly four paragraphs of
story, then draw one illustration per paragraph with the confirmed avatar as
the visual anchor. The request builders here are pure functions of their
inputs; all retry policy lives in ``generate_segment``.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backends import (
    ImageRequest,
    TextRequest,
    TraceInfo,
    generate_image,
    generate_text,
)
from .errors import (
    BackendFailure,
    ConfigError,
    EmptyResponse,
    InvalidInput,
    RemoteError,
    Timeout,
    UnconfirmedCharacter,
    WrongParagraphCount,
)
from .images import BlobStore
from .protocol import (
    DramaticStage,
    HopeComponent,
    chapter_spec,
    render_inquiry,
    validate_player_input,
)
from .scenarios import Scenario
from .session import CharacterProfile, GenerationMeta, StorySegment

PARAGRAPHS_PER_CHAPTER = 4
ILLUSTRATIONS_PER_CHAPTER = 4
CONTINUITY_BUDGET_CHARS = 6000
CHAPTER_JOB_TIMEOUT_S = 120.0
QUESTION_MAX_CHARS = 1000
STORY_MAX_CHARS = 6000

OUTPUT_CONTRACT = (
    "Write exactly four paragraphs, separated by blank lines. "
    "No headings, no lists, no paragraph numbering."
)


@dataclass(frozen=True)
class PromptSchema:
    """Per-chapter prompt document; a direct projection of the chapter spec."""

    chapter_index: int
    narrative_arc: DramaticStage
    inquiry_protocol: str
    stylistic_guidelines: str
    hope_component: HopeComponent

    def to_dict(self) -> dict:
        return {
            "chapter_index": self.chapter_index,
            "narrative_arc": self.narrative_arc.value,
            "inquiry_protocol": self.inquiry_protocol,
            "stylistic_guidelines": self.stylistic_guidelines,
            "hope_component": self.hope_component.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PromptSchema":
        return cls(
            chapter_index=int(data["chapter_index"]),
            narrative_arc=DramaticStage(data["narrative_arc"]),
            inquiry_protocol=str(data["inquiry_protocol"]),
            stylistic_guidelines=str(data["stylistic_guidelines"]),
            hope_component=HopeComponent(data["hope_component"]),
        )


def prompt_schema(chapter_index: int) -> PromptSchema:
    """Derive the chapter's prompt schema from the chapter spec (never stored
    separately in code, so the two cannot diverge)."""
    spec = chapter_spec(chapter_index)
    return PromptSchema(
        chapter_index=spec.index,
        narrative_arc=spec.dramatic_stage,
        inquiry_protocol=spec.inquiry_goal,
        stylistic_guidelines=spec.writing_guidelines,
        hope_component=spec.hope_component,
    )


def dump_prompt_schemas(directory: str | Path) -> list[Path]:
    """Write the four schemas as auditable per-chapter JSON documents."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index in range(1, 5):
        path = directory / f"chapter_{index}.json"
        path.write_text(
            json.dumps(prompt_schema(index).to_dict(), indent=2, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        written.append(path)
    return written


def load_prompt_schema(path: str | Path) -> PromptSchema:
    """Load a schema document and verify it still mirrors the chapter spec."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    schema = PromptSchema.from_dict(data)
    if schema != prompt_schema(schema.chapter_index):
        raise ConfigError(f"{path} has diverged from the chapter definition")
    return schema


def bundled_prompt_schema_text(chapter_index: int) -> str:
    entry = resources.files("storytriad").joinpath(
        f"data/prompt_schemas/chapter_{chapter_index}.json"
    )
    return entry.read_text(encoding="utf-8")


@dataclass(frozen=True)
class GenerationContext:
    """Everything the writing agent needs to keep a chapter coherent."""

    scenario: Scenario
    character: CharacterProfile
    prior_segments: tuple[StorySegment, ...]
    current_input: str

    def __post_init__(self) -> None:
        indices = [seg.chapter_index for seg in self.prior_segments]
        if indices != list(range(1, len(indices) + 1)):
            raise ConfigError(f"prior segments must be chapters 1..k, got {indices}")


_HOPE_DIRECTIVES = {
    HopeComponent.GOALS: (
        "Anchor the chapter on the protagonist's stated goal; make it concrete "
        "and personally meaningful."
    ),
    HopeComponent.PATHWAYS: (
        "Show routes toward the goal being built or tested; keep cause and "
        "effect visible."
    ),
    HopeComponent.AGENCY: (
        "The resolution must originate in the protagonist's own stated plan "
        "and effort. No luck, no rescue, no deus ex machina."
    ),
}


def build_question_request(
    schema: PromptSchema, scenario: Scenario, character: CharacterProfile
) -> TextRequest:
    """Request for the questioning agent (optional backend path; the default
    path renders the scenario template directly)."""
    if not character.confirmed:
        raise UnconfirmedCharacter("character must be confirmed before chapter play")
    inquiry = render_inquiry(chapter_spec(schema.chapter_index), scenario, character.name)
    system = (
        "You are the warm, encouraging narrator of a collaborative story.\n"
        f"Chapter {schema.chapter_index} inquiry goal: {schema.inquiry_protocol}\n"
        "Ask the players exactly one question, inviting a specific answer."
    )
    user = f"Story setting: {scenario.setting_description}\n\n{inquiry}"
    return TextRequest(
        system_directive=system,
        user_message=user,
        trace=TraceInfo("-", schema.chapter_index, "questioning"),
        max_length=QUESTION_MAX_CHARS,
    )


def continuity_block(
    prior_segments: tuple[StorySegment, ...], budget: int = CONTINUITY_BUDGET_CHARS
) -> str:
    """Full prior text, trimmed oldest-paragraph-first to fit the budget."""
    entries: list[str] = []
    for segment in prior_segments:
        for paragraph in segment.paragraphs:
            entries.append(paragraph)
    while entries and sum(len(e) + 2 for e in entries) > budget:
        entries.pop(0)
    return "\n\n".join(entries)


def build_writing_request(schema: PromptSchema, context: GenerationContext) -> TextRequest:
    check = validate_player_input(context.current_input)
    if not check.ok:
        raise InvalidInput(f"player input rejected: {check.reason}")
    spec = chapter_spec(schema.chapter_index)
    system = "\n".join(
        [
            "You are the writing agent of a collaborative storytelling session.",
            f"Chapter {schema.chapter_index} ({spec.title}), "
            f"dramatic stage: {schema.narrative_arc.value}.",
            f"Guidelines: {schema.stylistic_guidelines}",
            f"Focus: {_HOPE_DIRECTIVES[schema.hope_component]}",
            OUTPUT_CONTRACT,
        ]
    )
    sections = [
        f"Story setting: {context.scenario.setting_description}",
        f"Protagonist: {context.character.name}",
    ]
    story_so_far = continuity_block(context.prior_segments)
    if story_so_far:
        sections.append(f"Story so far:\n{story_so_far}")
    role = spec.owning_role.value
    # the player's words stay last and verbatim; the mock backend echoes them
    sections.append(f"Input from the {role} player:\n{check.text}")
    return TextRequest(
        system_directive=system,
        user_message="\n\n".join(sections),
        trace=TraceInfo("-", schema.chapter_index, "writing"),
        max_length=STORY_MAX_CHARS,
    )


def parse_story_response(raw_text: str) -> list[str] | WrongParagraphCount:
    """Split generated text into exactly four paragraphs.

    Returns the paragraphs, or a WrongParagraphCount *value* (not raised) so
    the caller can apply its retry policy.
    """
    paragraphs = [p.strip() for p in raw_text.split("\n\n")]
    paragraphs = [p for p in paragraphs if p]
    if len(paragraphs) != PARAGRAPHS_PER_CHAPTER:
        return WrongParagraphCount(len(paragraphs))
    return paragraphs


def build_illustration_requests(
    segment_paragraphs: list[str],
    character: CharacterProfile,
    style: str,
    *,
    trace: TraceInfo,
) -> list[ImageRequest]:
    """One request per paragraph, each anchored to the avatar and style tokens."""
    if len(segment_paragraphs) != PARAGRAPHS_PER_CHAPTER:
        raise WrongParagraphCount(len(segment_paragraphs))
    if character.avatar is None:
        raise UnconfirmedCharacter("character avatar missing for illustration")
    requests = []
    for i, paragraph in enumerate(segment_paragraphs):
        prompt = (
            f"Illustration {i + 1} of 4 for this chapter. "
            f"Depict the protagonist {character.name} in this scene: {paragraph}"
        )
        requests.append(
            ImageRequest(
                prompt=prompt,
                reference_image=character.avatar,
                style_tokens=style,
                trace=TraceInfo(trace.session_id, trace.chapter_index, f"drawing-{i + 1}"),
            )
        )
    return requests


_TRANSIENT = (Timeout, RemoteError, EmptyResponse)


def generate_segment(
    schema: PromptSchema,
    context: GenerationContext,
    *,
    text_backend,
    image_backend,
    store: BlobStore,
    session_id: str,
    regenerations: int = 0,
    clock=time.time,
    deadline_s: float = CHAPTER_JOB_TIMEOUT_S,
) -> StorySegment:
    """Run writing then drawing for one chapter and assemble the segment.

    Retry policy: one automatic retry on a paragraph-count violation or a
    transient backend error, then the failure surfaces. The four illustration
    requests run in parallel. Raises Timeout if the whole job exceeds the
    deadline; the segment is returned whole (committing it is the caller's
    job, via the session's serialized path).
    """
    started = clock()
    deadline = started + deadline_s

    def check_deadline() -> None:
        if clock() > deadline:
            raise Timeout(f"chapter job exceeded {deadline_s:.0f} s")

    base_request = build_writing_request(schema, context)
    request = TextRequest(
        system_directive=base_request.system_directive,
        user_message=base_request.user_message,
        trace=TraceInfo(session_id, schema.chapter_index, "writing"),
        max_length=base_request.max_length,
    )

    paragraphs: list[str] | None = None
    failure: Exception | None = None
    for _ in range(2):  # initial attempt + one automatic retry
        check_deadline()
        try:
            raw = generate_text(text_backend, request)
        except _TRANSIENT as exc:
            failure = exc
            continue
        parsed = parse_story_response(raw)
        if isinstance(parsed, WrongParagraphCount):
            failure = parsed
            continue
        paragraphs = parsed
        break
    if paragraphs is None:
        assert failure is not None
        if isinstance(failure, WrongParagraphCount):
            raise BackendFailure("WrongParagraphCount", str(failure))
        if isinstance(failure, Timeout):
            raise failure
        raise BackendFailure(failure.code, str(failure))

    check_deadline()
    illustration_requests = build_illustration_requests(
        paragraphs,
        context.character,
        context.character.style_tokens,
        trace=TraceInfo(session_id, schema.chapter_index, "drawing"),
    )
    remaining = max(deadline - clock(), 0.1)
    with ThreadPoolExecutor(max_workers=ILLUSTRATIONS_PER_CHAPTER) as pool:
        futures = [
            pool.submit(generate_image, image_backend, req, store)
            for req in illustration_requests
        ]
        illustrations = []
        for future in futures:
            try:
                illustrations.append(future.result(timeout=remaining))
            except (FutureTimeout, TimeoutError):
                for f in futures:
                    f.cancel()
                raise Timeout(f"illustrations exceeded the {deadline_s:.0f} s budget") from None

    text_id = text_backend.descriptor.id
    image_id = image_backend.descriptor.id
    backend_id = text_id if text_id == image_id else f"{text_id}+{image_id}"
    meta = GenerationMeta(
        backend_id=backend_id,
        duration_ms=int((clock() - started) * 1000),
        regenerations=regenerations,
    )
    return StorySegment(
        chapter_index=schema.chapter_index,
        player_input=context.current_input,
        paragraphs=tuple(paragraphs),
        illustrations=tuple(illustrations),
        meta=meta,
    )
