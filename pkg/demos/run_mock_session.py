#!/usr/bin/env python3
"""Walk a complete storytelling session on the deterministic mock backends.

Creates a session, picks the high-school scenario, seats three players,
builds the character from a generated "selfie", plays all four chapters and
writes the exported story (JSON + self-contained HTML) to ./demo_out/.

Run:  python3 demos/run_mock_session.py
"""

from __future__ import annotations

import io
import json
import sys
import tempfile
import time
from pathlib import Path

from PIL import Image, ImageDraw

from storytriad import ServiceConfig, SessionService

OUT_DIR = Path(__file__).parent / "demo_out"

INPUTS = {
    1: "I want to join the astronomy club and see Saturn's rings for real",
    2: "A retired astronomer moves in next door with a garage full of telescopes",
    3: "The school plans to close the club because only two members signed up",
    4: "Host a star-gazing night on the sports field to win twenty new members",
}


def pretend_selfie() -> bytes:
    """A stand-in for the camera: a simple face-ish sketch."""
    img = Image.new("RGB", (256, 256), (245, 235, 220))
    draw = ImageDraw.Draw(img)
    draw.ellipse([48, 40, 208, 216], fill=(250, 214, 183), outline=(90, 60, 40), width=4)
    draw.ellipse([92, 104, 116, 128], fill=(40, 40, 60))
    draw.ellipse([140, 104, 164, 128], fill=(40, 40, 60))
    draw.arc([96, 140, 160, 192], start=20, end=160, fill=(120, 60, 50), width=5)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def wait(service: SessionService, job_id: str) -> dict:
    while True:
        status = service.job_status(job_id)
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)


def main() -> int:
    data_dir = Path(tempfile.mkdtemp(prefix="storytriad-demo-"))
    service = SessionService(ServiceConfig(data_dir=data_dir, mock=True))
    sid = "demo"
    try:
        service.create(sid)
        print(f"session {sid} created (state in {data_dir})")

        service.select_scenario(sid, "high_school")
        print("scenario: High School Life")

        tokens = {}
        for name, role in [("Ada", "protagonist"), ("Ben", "opportunity"), ("Caz", "challenge")]:
            joined = service.add_participant(sid, name)
            service.assign_role(sid, joined["participant_id"], role)
            tokens[role] = joined["token"]
            print(f"  {name} plays {role}")

        service.ingest_character_source(sid, pretend_selfie(), "png")
        status = wait(service, service.start_avatar_job(sid))
        print(f"avatar stylized: {status['result']['image']['content_address'][:16]}…")
        service.confirm_character(sid, "Mei")
        print("character confirmed: Mei\n")

        for chapter in range(1, 5):
            snapshot = service.snapshot(sid)
            role = snapshot["current_turn"]
            print(f"— Chapter {chapter} — narrator asks ({role}'s turn):")
            print(f"  “{snapshot['inquiry']}”")
            print(f"  {role} answers: “{INPUTS[chapter]}”")
            job_id = service.submit_chapter_input(sid, tokens[role], chapter, INPUTS[chapter])
            status = wait(service, job_id)
            if status["state"] != "done":
                print(f"  generation failed: {status['error']}", file=sys.stderr)
                return 1
            segment = service.snapshot(sid)["segments"][str(chapter)]
            print(f"  first paragraph: {segment['paragraphs'][0][:88]}…")
            service.accept_segment(sid, tokens["protagonist"], chapter)
            print("  accepted.\n")

        OUT_DIR.mkdir(exist_ok=True)
        for fmt, filename in [("json", "story.json"), ("html", "story.html")]:
            data, _ = service.export(sid, fmt)
            (OUT_DIR / filename).write_bytes(data)
        document = json.loads((OUT_DIR / "story.json").read_text())
        paragraphs = sum(len(c["paragraphs"]) for c in document["chapters"])
        images = sum(len(c["illustrations"]) for c in document["chapters"])
        print(f"exported {paragraphs} paragraphs and {images} illustrations")
        print(f"open {OUT_DIR / 'story.html'} in a browser to read the story")
        return 0
    finally:
        service.shutdown()


if __name__ == "__main__":
    sys.exit(main())
