"""The four-chapter narrative framework, encoded as data.

Each chapter carries a hope-theory component, a dramatic stage, the role that
owns the turn, the goal of the narrator's inquiry, and writing guidelines for
the story generator. The storytelling arc runs:

    1. The Goal        — protagonist names one specific aspiration  (Goals)
    2. The Opportunity — a favourable resource enters the story     (Pathways)
    3. The Challenge   — a complication tests the plan              (Pathways)
    4. The Resolve     — the protagonist's own strategy wins out    (Agency)

which maps one-to-one onto exposition, rising action, climax and resolution.
This table is the single source of truth for chapter-to-role ownership; the
session machine consults it rather than keeping its own copy.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import EmptyName, MissingTemplate, OutOfRange
from .scenarios import NAME_SLOT, Scenario


class Role(str, Enum):
    PROTAGONIST = "protagonist"
    OPPORTUNITY = "opportunity"
    CHALLENGE = "challenge"


class HopeComponent(str, Enum):
    GOALS = "goals"
    PATHWAYS = "pathways"
    AGENCY = "agency"


class DramaticStage(str, Enum):
    EXPOSITION = "exposition"
    RISING_ACTION = "rising_action"
    CLIMAX = "climax"
    RESOLUTION = "resolution"


MAX_INPUT_CHARS = 1000
CHAPTER_COUNT = 4


@dataclass(frozen=True)
class ChapterSpec:
    """Static definition of one chapter of the framework."""

    index: int
    title: str
    owning_role: Role
    hope_component: HopeComponent
    dramatic_stage: DramaticStage
    inquiry_goal: str
    writing_guidelines: str


_CHAPTERS: dict[int, ChapterSpec] = {
    1: ChapterSpec(
        index=1,
        title="The Goal",
        owning_role=Role.PROTAGONIST,
        hope_component=HopeComponent.GOALS,
        dramatic_stage=DramaticStage.EXPOSITION,
        inquiry_goal=(
            "Draw out one specific, personally meaningful aspiration from the "
            "protagonist player: the single thing their character desires most."
        ),
        writing_guidelines=(
            "Open the story. Establish the setting and the protagonist as a "
            "likeable, believable character, then let the chapter land on the "
            "stated goal, clearly and in the protagonist's own terms. Warm, "
            "grounded tone; no obstacles yet."
        ),
    ),
    2: ChapterSpec(
        index=2,
        title="The Opportunity",
        owning_role=Role.OPPORTUNITY,
        hope_component=HopeComponent.PATHWAYS,
        dramatic_stage=DramaticStage.RISING_ACTION,
        inquiry_goal=(
            "Draw out one favourable resource, person or event from the "
            "opportunity player: a piece of good luck that could open a route "
            "toward the goal."
        ),
        writing_guidelines=(
            "Raise the action. Weave the new opportunity into the protagonist's "
            "pursuit of the goal and show a plausible route forming. Hopeful "
            "momentum, but leave the outcome open."
        ),
    ),
    3: ChapterSpec(
        index=3,
        title="The Challenge",
        owning_role=Role.CHALLENGE,
        hope_component=HopeComponent.PATHWAYS,
        dramatic_stage=DramaticStage.CLIMAX,
        inquiry_goal=(
            "Draw out one concrete complication from the challenge player: an "
            "adverse turn that genuinely tests the route the group has built."
        ),
        writing_guidelines=(
            "Bring the story to its climax. The complication must put real "
            "pressure on the plan and on the protagonist. Keep the stakes "
            "honest: no resolution yet, and do not soften the difficulty."
        ),
    ),
    4: ChapterSpec(
        index=4,
        title="The Resolve",
        owning_role=Role.PROTAGONIST,
        hope_component=HopeComponent.AGENCY,
        dramatic_stage=DramaticStage.RESOLUTION,
        inquiry_goal=(
            "Draw out the protagonist player's own strategy for overcoming the "
            "established obstacle: what will their character actually do?"
        ),
        writing_guidelines=(
            "Resolve the story. The turning point must come from the "
            "protagonist's own stated strategy and effort, never from luck or "
            "outside rescue. End looking forward, with the goal in reach "
            "because of what the protagonist chose to do."
        ),
    ),
}


def chapter_spec(index: int) -> ChapterSpec:
    """Return the static spec for chapter ``index`` (1-4)."""
    spec = _CHAPTERS.get(index)
    if spec is None:
        raise OutOfRange(f"chapter index must be 1..4, got {index!r}")
    return spec


def all_chapter_specs() -> list[ChapterSpec]:
    return [_CHAPTERS[i] for i in range(1, CHAPTER_COUNT + 1)]


def owning_role(chapter_index: int) -> Role:
    return chapter_spec(chapter_index).owning_role


def render_inquiry(spec: ChapterSpec, scenario: Scenario, protagonist_name: str) -> str:
    """Fill the scenario's chapter template with the protagonist's name."""
    if not protagonist_name or not protagonist_name.strip():
        raise EmptyName("protagonist name must be non-empty")
    template = scenario.template_for(spec.index)
    if template is None or not template.strip():
        raise MissingTemplate(
            f"scenario {scenario.id!r} has no inquiry template for chapter {spec.index}"
        )
    rendered = template.replace(NAME_SLOT, protagonist_name.strip())
    if "{" in rendered or "}" in rendered:
        raise MissingTemplate(
            f"scenario {scenario.id!r} chapter {spec.index} template has unfilled slots"
        )
    return rendered


@dataclass(frozen=True)
class InputCheck:
    """Outcome of player-input validation; rejection is a value, not an error."""

    ok: bool
    text: str
    reason: str | None = None  # "Empty" | "TooLong"


def validate_player_input(text: str) -> InputCheck:
    """Accept non-blank input of at most MAX_INPUT_CHARS after trimming."""
    trimmed = text.strip()
    if not trimmed:
        return InputCheck(ok=False, text=trimmed, reason="Empty")
    if len(trimmed) > MAX_INPUT_CHARS:
        return InputCheck(ok=False, text=trimmed, reason="TooLong")
    return InputCheck(ok=True, text=trimmed)
