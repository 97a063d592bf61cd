#!/usr/bin/env python3
"""Print the four-chapter framework and the rendered narrator questions.

Shows how the chapter table (role ownership, hope component, dramatic stage)
drives the session, and how each bundled scenario phrases its inquiries for a
given protagonist name.

Run:  python3 demos/explore_chapter_framework.py [protagonist-name]
"""

from __future__ import annotations

import sys

from storytriad import ScenarioRegistry, chapter_spec, render_inquiry
from storytriad.pipeline import prompt_schema


def main() -> int:
    name = sys.argv[1] if len(sys.argv) > 1 else "Mei"
    print("chapter framework")
    print("-" * 72)
    for index in range(1, 5):
        spec = chapter_spec(index)
        print(
            f"{index}. {spec.title:16s} turn: {spec.owning_role.value:12s} "
            f"hope: {spec.hope_component.value:9s} arc: {spec.dramatic_stage.value}"
        )
    print()

    registry = ScenarioRegistry.bundled()
    for scenario in registry.all():
        print(f"scenario: {scenario.title} ({scenario.id})")
        for index in range(1, 5):
            question = render_inquiry(chapter_spec(index), scenario, name)
            print(f"  ch{index} ({chapter_spec(index).owning_role.value}): {question}")
        print()

    print("per-chapter prompt schema (chapter 4 shown)")
    print("-" * 72)
    schema = prompt_schema(4)
    print(f"narrative_arc:       {schema.narrative_arc.value}")
    print(f"hope_component:      {schema.hope_component.value}")
    print(f"inquiry_protocol:    {schema.inquiry_protocol}")
    print(f"writing guidelines:  {schema.stylistic_guidelines}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
