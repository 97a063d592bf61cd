"""Scenario definitions: the future life stage a group chooses to simulate.

Scenarios are data, not code. Each one lives in a JSON file with a stable id,
a setting description and one inquiry template per chapter, so facilitators
can author new life stages without touching the engine. Three defaults ship
with the package: high school life, university life and early career.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, UnknownScenario

NAME_SLOT = "{protagonist_name}"
_CHAPTER_KEYS = ("1", "2", "3", "4")


@dataclass(frozen=True)
class Scenario:
    """One selectable life stage with per-chapter inquiry templates."""

    id: str
    title: str
    setting_description: str
    chapter_inquiry_templates: dict[int, str] = field(default_factory=dict)

    def template_for(self, chapter_index: int) -> str | None:
        return self.chapter_inquiry_templates.get(chapter_index)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "setting_description": self.setting_description,
            "chapter_inquiry_templates": {
                str(k): v for k, v in sorted(self.chapter_inquiry_templates.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        templates = {
            int(k): str(v) for k, v in data.get("chapter_inquiry_templates", {}).items()
        }
        return cls(
            id=str(data["id"]),
            title=str(data["title"]),
            setting_description=str(data["setting_description"]),
            chapter_inquiry_templates=templates,
        )


def _validate(scenario: Scenario, origin: str) -> None:
    if not re.fullmatch(r"[a-z0-9_\-]+", scenario.id):
        raise ConfigError(f"{origin}: scenario id {scenario.id!r} is not a stable identifier")
    if not scenario.title or not scenario.setting_description:
        raise ConfigError(f"{origin}: title and setting_description must be non-empty")
    for key in _CHAPTER_KEYS:
        template = scenario.chapter_inquiry_templates.get(int(key), "")
        if not template.strip():
            raise ConfigError(f"{origin}: missing inquiry template for chapter {key}")
        if NAME_SLOT not in template:
            raise ConfigError(
                f"{origin}: chapter {key} template lacks the {NAME_SLOT} slot"
            )
        if template.count("{") != 1 or template.count("}") != 1:
            raise ConfigError(
                f"{origin}: chapter {key} template may contain only the {NAME_SLOT} slot"
            )


def load_scenario_file(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
    try:
        scenario = Scenario.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario file {path}: {exc}") from None
    _validate(scenario, str(path))
    return scenario


class ScenarioRegistry:
    """Lookup table of scenarios keyed by id."""

    def __init__(self, scenarios: list[Scenario]):
        self._by_id: dict[str, Scenario] = {}
        for scenario in scenarios:
            if scenario.id in self._by_id:
                raise ConfigError(f"duplicate scenario id {scenario.id!r}")
            self._by_id[scenario.id] = scenario

    @classmethod
    def from_directory(cls, directory: str | Path) -> "ScenarioRegistry":
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"scenario directory not found: {directory}")
        paths = sorted(directory.glob("*.json"))
        if not paths:
            raise ConfigError(f"no scenario files (*.json) in {directory}")
        return cls([load_scenario_file(p) for p in paths])

    @classmethod
    def bundled(cls) -> "ScenarioRegistry":
        """The three scenarios shipped with the package."""
        package_dir = resources.files("storytriad").joinpath("data/scenarios")
        scenarios = []
        for entry in sorted(package_dir.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".json"):
                data = json.loads(entry.read_text(encoding="utf-8"))
                scenario = Scenario.from_dict(data)
                _validate(scenario, entry.name)
                scenarios.append(scenario)
        return cls(scenarios)

    def get(self, scenario_id: str) -> Scenario:
        scenario = self._by_id.get(scenario_id)
        if scenario is None:
            raise UnknownScenario(f"no scenario registered with id {scenario_id!r}")
        return scenario

    def ids(self) -> list[str]:
        return sorted(self._by_id)

    def all(self) -> list[Scenario]:
        return [self._by_id[i] for i in self.ids()]
