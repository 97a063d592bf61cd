"""Story export: a structured JSON document and a self-contained HTML page.

Both formats are deterministic functions of the session (stable field order,
stable image embedding), so identical sessions export byte-identically. The
HTML inlines every image as base64 so a single file can be shared offline.
The source selfie is deliberately absent from both formats.
"""

from __future__ import annotations

import base64
import html
import json

from .errors import ConfigError, MissingImage, WrongPhase
from .images import BlobStore
from .protocol import chapter_spec
from .session import Session, Stage

EXPORT_FORMATS = ("json", "html")


def build_story_document(session: Session, store: BlobStore) -> dict:
    """Assemble the StoryDocument; verifies every image is resolvable."""
    if session.phase.stage not in (Stage.PRESENTATION, Stage.CLOSED):
        raise WrongPhase(
            f"export needs a finished story (phase is {session.phase.encode()})",
            phase=session.phase.encode(),
        )
    character = session.character
    assert character is not None and character.avatar is not None  # by phase invariant
    if not store.exists(character.avatar.content_address):
        raise MissingImage(character.avatar.content_address)

    chapters = []
    for index in sorted(session.segments):
        segment = session.segments[index]
        spec = chapter_spec(index)
        for ref in segment.illustrations:
            if not store.exists(ref.content_address):
                raise MissingImage(ref.content_address)
        chapters.append(
            {
                "index": index,
                "title": spec.title,
                "hope_component": spec.hope_component.value,
                "player_role": spec.owning_role.value,
                "player_input": segment.player_input,
                "paragraphs": list(segment.paragraphs),
                "illustrations": [ref.to_dict() for ref in segment.illustrations],
            }
        )

    return {
        "session_id": session.id,
        "scenario_title": session.scenario.title if session.scenario else "",
        "character": {"name": character.name, "avatar": character.avatar.to_dict()},
        "chapters": chapters,
        "created_at": session.created_at,
    }


def _data_uri(store: BlobStore, content_address: str) -> str:
    data = store.get(content_address)
    media = store.media_type(content_address)
    return f"data:image/{media};base64,{base64.b64encode(data).decode('ascii')}"


_HTML_STYLE = """
body { font-family: Georgia, serif; max-width: 52rem; margin: 2rem auto; padding: 0 1rem; }
header { text-align: center; margin-bottom: 2rem; }
header img.avatar { width: 160px; border-radius: 12px; }
section.chapter { margin: 3rem 0; }
section.chapter h2 span.hope { font-size: 0.7em; color: #666; margin-left: 0.8em;
  text-transform: uppercase; letter-spacing: 0.08em; }
div.scene { display: flex; gap: 1rem; align-items: flex-start; margin: 1.2rem 0; }
div.scene img { width: 220px; border-radius: 8px; flex-shrink: 0; }
p.player-input { color: #555; font-style: italic; }
""".strip()


def render_story_html(document: dict, store: BlobStore) -> str:
    title = html.escape(document["scenario_title"])
    name = html.escape(document["character"]["name"])
    avatar_uri = _data_uri(store, document["character"]["avatar"]["content_address"])
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>{name} — {title}</title>",
        f"<style>{_HTML_STYLE}</style>",
        "</head><body>",
        "<header>",
        f'<img class="avatar" src="{avatar_uri}" alt="avatar of {name}">',
        f"<h1>{name} — {title}</h1>",
        "</header>",
    ]
    for chapter in document["chapters"]:
        hope = html.escape(chapter["hope_component"])
        parts.append('<section class="chapter">')
        parts.append(
            f"<h2>Chapter {chapter['index']}: {html.escape(chapter['title'])}"
            f'<span class="hope">{hope}</span></h2>'
        )
        parts.append(
            f'<p class="player-input">{html.escape(chapter["player_role"])} player: '
            f"“{html.escape(chapter['player_input'])}”</p>"
        )
        for paragraph, ref in zip(chapter["paragraphs"], chapter["illustrations"]):
            uri = _data_uri(store, ref["content_address"])
            parts.append('<div class="scene">')
            parts.append(f'<img src="{uri}" alt="illustration">')
            parts.append(f"<p>{html.escape(paragraph)}</p>")
            parts.append("</div>")
        parts.append("</section>")
    parts.append("</body></html>")
    return "\n".join(parts)


def export_story(session: Session, fmt: str, store: BlobStore) -> bytes:
    if fmt not in EXPORT_FORMATS:
        raise ConfigError(f"export format must be one of {EXPORT_FORMATS}, got {fmt!r}")
    document = build_story_document(session, store)
    if fmt == "json":
        return (json.dumps(document, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    return render_story_html(document, store).encode("utf-8")
