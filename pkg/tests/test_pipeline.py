from __future__ import annotations

import re
import time
from importlib import resources

import pytest
from helpers import TickClock, png_bytes

from storytriad.backends import BackendDescriptor, MockImageBackend, MockTextBackend
from storytriad.errors import (
    BackendFailure,
    EmptyResponse,
    InvalidInput,
    Timeout,
    UnconfirmedCharacter,
    WrongParagraphCount,
)
from storytriad.images import BlobStore
from storytriad.pipeline import (
    CONTINUITY_BUDGET_CHARS,
    GenerationContext,
    build_illustration_requests,
    build_question_request,
    build_writing_request,
    continuity_block,
    generate_segment,
    load_prompt_schema,
    parse_story_response,
    prompt_schema,
)
from storytriad.protocol import chapter_spec
from storytriad.session import CharacterProfile, GenerationMeta, StorySegment
from storytriad.backends import TraceInfo


def confirmed_character(store: BlobStore | None = None) -> CharacterProfile:
    avatar = None
    source = None
    if store is not None:
        source = store.put(png_bytes(color=(9, 9, 9)))
        avatar = store.put(png_bytes(color=(99, 99, 99)))
    return CharacterProfile(
        name="Mei",
        source_image=source,
        avatar=avatar,
        style_tokens="soft watercolor",
        confirmed=True,
    )


def make_segment(chapter: int, paragraphs=None) -> StorySegment:
    paragraphs = paragraphs or tuple(f"c{chapter} p{i} " + "w" * 40 for i in range(4))
    return StorySegment(
        chapter_index=chapter,
        player_input="idea",
        paragraphs=tuple(paragraphs),
        illustrations=(),  # continuity only reads paragraphs
        meta=GenerationMeta("test", 1, 0),
    )


class TestPromptSchema:
    def test_mirrors_chapter_spec(self):
        for index in range(1, 5):
            schema = prompt_schema(index)
            spec = chapter_spec(index)
            assert schema.chapter_index == spec.index
            assert schema.narrative_arc == spec.dramatic_stage
            assert schema.inquiry_protocol == spec.inquiry_goal
            assert schema.stylistic_guidelines == spec.writing_guidelines
            assert schema.hope_component == spec.hope_component

    def test_bundled_documents_match(self, tmp_path):
        package_dir = resources.files("storytriad").joinpath("data/prompt_schemas")
        for index in range(1, 5):
            entry = package_dir.joinpath(f"chapter_{index}.json")
            path = tmp_path / f"chapter_{index}.json"
            path.write_text(entry.read_text(encoding="utf-8"), encoding="utf-8")
            assert load_prompt_schema(path) == prompt_schema(index)


class TestQuestionRequest:
    def test_contains_rendered_template(self, high_school):
        request = build_question_request(prompt_schema(1), high_school, confirmed_character())
        assert "Mei has just stepped into high school" in request.user_message
        assert request.trace.agent == "questioning"
        assert request.trace.chapter_index == 1

    def test_deterministic(self, high_school):
        a = build_question_request(prompt_schema(2), high_school, confirmed_character())
        b = build_question_request(prompt_schema(2), high_school, confirmed_character())
        assert a == b

    def test_unconfirmed_character(self, high_school):
        unconfirmed = CharacterProfile(name="Mei", confirmed=False)
        with pytest.raises(UnconfirmedCharacter):
            build_question_request(prompt_schema(1), high_school, unconfirmed)


class TestWritingRequest:
    def context(self, high_school, prior=(), text="build a telescope"):
        return GenerationContext(
            scenario=high_school,
            character=confirmed_character(),
            prior_segments=tuple(prior),
            current_input=text,
        )

    def test_output_contract_always_present(self, high_school):
        for index in range(1, 5):
            prior = tuple(make_segment(i) for i in range(1, index))
            request = build_writing_request(prompt_schema(index), self.context(high_school, prior))
            assert "exactly four paragraphs" in request.system_directive

    def test_chapter_four_requires_protagonist_resolution(self, high_school):
        prior = tuple(make_segment(i) for i in range(1, 4))
        request = build_writing_request(prompt_schema(4), self.context(high_school, prior))
        assert "protagonist's own stated plan" in request.system_directive
        assert "deus ex machina" in request.system_directive

    def test_chapter_one_has_no_continuity_block(self, high_school):
        request = build_writing_request(prompt_schema(1), self.context(high_school))
        assert "Story so far" not in request.user_message

    def test_player_input_is_verbatim_final_line(self, high_school):
        request = build_writing_request(
            prompt_schema(1), self.context(high_school, text="  join the astronomy club  ")
        )
        assert request.user_message.splitlines()[-1] == "join the astronomy club"

    def test_invalid_input_rejected(self, high_school):
        with pytest.raises(InvalidInput):
            build_writing_request(prompt_schema(1), self.context(high_school, text="   "))

    def test_purity(self, high_school):
        prior = (make_segment(1),)
        a = build_writing_request(prompt_schema(2), self.context(high_school, prior))
        b = build_writing_request(prompt_schema(2), self.context(high_school, prior))
        assert a == b


class TestContinuityBudget:
    def test_keeps_everything_under_budget(self):
        segments = (make_segment(1), make_segment(2))
        block = continuity_block(segments)
        for segment in segments:
            for paragraph in segment.paragraphs:
                assert paragraph in block

    def test_truncates_oldest_first(self):
        big = tuple(
            make_segment(i, paragraphs=tuple(f"c{i}p{j} " + "x" * 900 for j in range(4)))
            for i in (1, 2, 3)
        )
        block = continuity_block(big)
        assert len(block) <= CONTINUITY_BUDGET_CHARS
        assert "c1p0" not in block  # oldest dropped
        assert "c3p3" in block  # newest kept


class TestParseStoryResponse:
    def oracle_split(self, text):
        return [p.strip() for p in re.split(r"\n\s*\n", text.strip()) if p.strip()]

    def test_canonical_form(self):
        assert parse_story_response("A\n\nB\n\nC\n\nD") == ["A", "B", "C", "D"]

    def test_three_paragraphs_rejected_as_value(self):
        rejection = parse_story_response("A\n\nB\n\nC")
        assert isinstance(rejection, WrongParagraphCount)
        assert rejection.count == 3

    def test_repeated_blank_lines_collapse(self):
        text = "A\n\n\n\nB\n\nC\n\nD"
        assert parse_story_response(text) == self.oracle_split(text) == ["A", "B", "C", "D"]

    def test_whitespace_only_paragraphs_ignored(self):
        text = "  A  \n\n   \n\nB\n\nC\n\nD\n\n"
        assert parse_story_response(text) == self.oracle_split(text)


class TestIllustrationRequests:
    def test_four_requests_with_avatar(self, tmp_path):
        store = BlobStore(tmp_path)
        character = confirmed_character(store)
        paragraphs = [f"P{i}" for i in range(4)]
        requests = build_illustration_requests(
            paragraphs, character, character.style_tokens, trace=TraceInfo("s", 2, "drawing")
        )
        assert len(requests) == 4
        for i, request in enumerate(requests):
            assert request.reference_image == character.avatar
            assert request.style_tokens == "soft watercolor"
            assert f"P{i}" in request.prompt
            assert request.trace.agent == f"drawing-{i + 1}"

    def test_wrong_count_raises(self, tmp_path):
        store = BlobStore(tmp_path)
        character = confirmed_character(store)
        with pytest.raises(WrongParagraphCount):
            build_illustration_requests(
                ["a", "b", "c"], character, "s", trace=TraceInfo("s", 1, "drawing")
            )


class _FlakyText:
    """Returns bad output for the first ``bad`` calls, then a valid story."""

    def __init__(self, bad: int, failure="three_paragraphs"):
        self.descriptor = BackendDescriptor(id="flaky", kind="text", endpoint="mock")
        self.calls = 0
        self.bad = bad
        self.failure = failure

    def generate(self, request):
        self.calls += 1
        if self.calls <= self.bad:
            if self.failure == "three_paragraphs":
                return "A\n\nB\n\nC"
            if self.failure == "empty":
                raise EmptyResponse("nothing came back")
            if self.failure == "stall":
                time.sleep(0.5)
                return "A\n\nB\n\nC\n\nD"
        return "A\n\nB\n\nC\n\nD"


class TestGenerateSegment:
    def run(self, text_backend, high_school, tmp_path, clock=time.time, deadline_s=120.0):
        store = BlobStore(tmp_path)
        character = confirmed_character(store)
        context = GenerationContext(
            scenario=high_school,
            character=character,
            prior_segments=(),
            current_input="join the astronomy club",
        )
        return generate_segment(
            prompt_schema(1),
            context,
            text_backend=text_backend,
            image_backend=MockImageBackend(),
            store=store,
            session_id="s1",
            clock=clock,
            deadline_s=deadline_s,
        )

    def test_mock_path_produces_contract_segment(self, high_school, tmp_path):
        segment = self.run(MockTextBackend(), high_school, tmp_path, clock=TickClock())
        assert len(segment.paragraphs) == 4
        assert len(segment.illustrations) == 4
        assert segment.chapter_index == 1
        assert segment.meta.backend_id == "mock-text+mock-image"
        assert segment.meta.regenerations == 0

    def test_deterministic_output(self, high_school, tmp_path):
        a = self.run(MockTextBackend(), high_school, tmp_path / "a", clock=TickClock())
        b = self.run(MockTextBackend(), high_school, tmp_path / "b", clock=TickClock())
        assert a.paragraphs == b.paragraphs
        assert [r.content_address for r in a.illustrations] == [
            r.content_address for r in b.illustrations
        ]

    def test_one_retry_then_success(self, high_school, tmp_path):
        flaky = _FlakyText(bad=1)
        segment = self.run(flaky, high_school, tmp_path)
        assert flaky.calls == 2
        assert len(segment.paragraphs) == 4

    def test_persistent_contract_violation_fails(self, high_school, tmp_path):
        flaky = _FlakyText(bad=99)
        with pytest.raises(BackendFailure) as err:
            self.run(flaky, high_school, tmp_path)
        assert err.value.kind == "WrongParagraphCount"
        assert flaky.calls == 2  # initial + one automatic retry

    def test_transient_empty_then_success(self, high_school, tmp_path):
        flaky = _FlakyText(bad=1, failure="empty")
        segment = self.run(flaky, high_school, tmp_path)
        assert flaky.calls == 2
        assert len(segment.paragraphs) == 4

    def test_stalling_backend_times_out(self, high_school, tmp_path):
        flaky = _FlakyText(bad=99, failure="stall")
        with pytest.raises(Timeout):
            self.run(flaky, high_school, tmp_path, deadline_s=0.2)


class TestGenerationContext:
    def test_prior_segments_must_be_prefix(self, high_school):
        with pytest.raises(Exception):
            GenerationContext(
                scenario=high_school,
                character=confirmed_character(),
                prior_segments=(make_segment(2),),
                current_input="x",
            )
