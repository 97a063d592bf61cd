"""Shared test utilities: deterministic clock, tiny images, session drivers."""

from __future__ import annotations

import io
import threading
import time

from PIL import Image

from storytriad.session import (
    EventKind,
    Session,
    SessionEvent,
    apply_event,
    create_session,
)


class TickClock:
    """Logical clock: starts at a fixed epoch, advances one second per call."""

    def __init__(self, start: float = 1_700_000_000.0):
        self._now = start
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            self._now += 1.0
            return self._now


def png_bytes(size=(64, 64), color=(120, 180, 90)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="PNG")
    return buf.getvalue()


def jpeg_bytes(size=(64, 64), color=(200, 40, 80)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="JPEG")
    return buf.getvalue()


def fake_ref_dict(tag: int) -> dict:
    return {
        "content_address": f"{tag:064x}",
        "media_type": "png",
        "width": 8,
        "height": 8,
    }


def segment_payload(chapter: int, text: str = "an idea") -> dict:
    return {
        "chapter": chapter,
        "segment": {
            "chapter_index": chapter,
            "player_input": text,
            "paragraphs": [f"Chapter {chapter} paragraph {i}." for i in range(1, 5)],
            "illustrations": [fake_ref_dict(chapter * 10 + i) for i in range(4)],
            "generation_meta": {
                "backend_id": "test",
                "duration_ms": 5,
                "regenerations": 0,
            },
        },
    }


ROLE_OF_CHAPTER = {1: "protagonist", 2: "opportunity", 3: "challenge", 4: "protagonist"}
PLAYER_OF_ROLE = {"protagonist": "p1", "opportunity": "p2", "challenge": "p3"}


def machine_session(scenario, clock=None) -> Session:
    """Session driven straight through apply_event up to chapter 1 inquiry."""
    clock = clock or TickClock()
    session = create_session(clock=clock, session_id="machine")
    apply_event(
        session,
        "facilitator",
        SessionEvent(EventKind.SCENARIO_SELECTED, {"scenario": scenario.to_dict()}),
        clock=clock,
    )
    for pid, role in [("p1", "protagonist"), ("p2", "opportunity"), ("p3", "challenge")]:
        apply_event(
            session,
            pid,
            SessionEvent(
                EventKind.PARTICIPANT_REGISTERED,
                {"participant_id": pid, "display_name": pid.upper(), "is_facilitator": False},
            ),
            clock=clock,
        )
    for pid, role in [("p1", "protagonist"), ("p2", "opportunity"), ("p3", "challenge")]:
        apply_event(
            session,
            "facilitator",
            SessionEvent(EventKind.ROLE_ASSIGNED, {"participant_id": pid, "role": role}),
            clock=clock,
        )
    apply_event(
        session,
        "p1",
        SessionEvent(
            EventKind.SOURCE_INGESTED,
            {"image": fake_ref_dict(1), "style_tokens": "test style"},
        ),
        clock=clock,
    )
    apply_event(
        session,
        "system",
        SessionEvent(EventKind.AVATAR_GENERATED, {"image": fake_ref_dict(2)}),
        clock=clock,
    )
    apply_event(
        session,
        "p1",
        SessionEvent(EventKind.CHARACTER_CONFIRMED, {"name": "Mei"}),
        clock=clock,
    )
    return session


def play_chapter(session, chapter: int, clock, text: str = "an idea") -> None:
    """inquiry -> input -> commit -> accept for one chapter, via raw events."""
    apply_event(
        session,
        "system",
        SessionEvent(
            EventKind.INQUIRY_PRESENTED, {"chapter": chapter, "inquiry": f"Question {chapter}?"}
        ),
        clock=clock,
    )
    actor = PLAYER_OF_ROLE[ROLE_OF_CHAPTER[chapter]]
    apply_event(
        session,
        actor,
        SessionEvent(EventKind.INPUT_SUBMITTED, {"chapter": chapter, "text": text}),
        clock=clock,
    )
    apply_event(
        session,
        "system",
        SessionEvent(EventKind.SEGMENT_COMMITTED, segment_payload(chapter, text)),
        clock=clock,
    )
    apply_event(
        session,
        "p1",
        SessionEvent(EventKind.SEGMENT_ACCEPTED, {"chapter": chapter}),
        clock=clock,
    )


def run_service_session(service, session_id: str = "svc", wait_s: float = 30.0) -> str:
    """Drive one full session through the SessionService API (no HTTP)."""
    service.create(session_id)
    service.select_scenario(session_id, "high_school")
    tokens = {}
    for name, role in [("Ada", "protagonist"), ("Ben", "opportunity"), ("Caz", "challenge")]:
        joined = service.add_participant(session_id, name)
        service.assign_role(session_id, joined["participant_id"], role)
        tokens[role] = joined["token"]
    service.ingest_character_source(session_id, png_bytes(), "png")
    wait_for_job(service, service.start_avatar_job(session_id), wait_s)
    service.confirm_character(session_id, "Mei")
    inputs = {
        1: "I want to join the astronomy club",
        2: "A retired astronomer moves in next door",
        3: "The club is about to be shut down",
        4: "Organize a star-gazing night to save it",
    }
    for chapter in range(1, 5):
        snapshot = service.snapshot(session_id)
        role = snapshot["current_turn"]
        job_id = service.submit_chapter_input(session_id, tokens[role], chapter, inputs[chapter])
        status = wait_for_job(service, job_id, wait_s)
        assert status["state"] == "done", status
        service.accept_segment(session_id, tokens["protagonist"], chapter)
    return session_id


def wait_for_job(service, job_id: str, timeout_s: float = 30.0) -> dict:
    deadline = time.monotonic() + timeout_s
    while True:
        status = service.job_status(job_id)
        if status["state"] in ("done", "failed"):
            return status
        if time.monotonic() > deadline:
            raise AssertionError(f"job {job_id} still {status['state']} after {timeout_s}s")
        time.sleep(0.02)


# --- HTTP scripted run -------------------------------------------------------------


def poll_job(client, job_id: str, timeout_s: float = 30.0) -> dict:
    """Poll a job until terminal; asserts the state order never regresses."""
    order = {"pending": 0, "running": 1, "done": 2, "failed": 2}
    last = -1
    deadline = time.monotonic() + timeout_s
    while True:
        status = client.get(f"/jobs/{job_id}")
        assert status.status_code == 200, status.text
        body = status.json()
        rank = order[body["state"]]
        assert rank >= last, f"job state regressed: {body['state']}"
        last = rank
        if body["state"] in ("done", "failed"):
            return body
        assert time.monotonic() < deadline, f"job {job_id} did not finish in {timeout_s}s"
        time.sleep(0.02)


def run_scripted_session(client, session_id: str = "scripted") -> dict:
    """Drive one full session over HTTP; returns ids, tokens and export bytes."""
    created = client.post("/sessions", json={"session_id": session_id})
    assert created.status_code == 201, created.text

    resp = client.post(f"/sessions/{session_id}/scenario", json={"scenario_id": "high_school"})
    assert resp.status_code == 200, resp.text

    tokens = {}
    for name, role in [("Ada", "protagonist"), ("Ben", "opportunity"), ("Caz", "challenge")]:
        joined = client.post(
            f"/sessions/{session_id}/participants", json={"display_name": name}
        )
        assert joined.status_code == 201, joined.text
        body = joined.json()
        assigned = client.post(
            f"/sessions/{session_id}/roles",
            json={"participant_id": body["participant_id"], "role": role},
        )
        assert assigned.status_code == 200, assigned.text
        tokens[role] = body["token"]

    upload = client.post(
        f"/sessions/{session_id}/character/source",
        content=png_bytes(),
        headers={"Content-Type": "image/png"},
    )
    assert upload.status_code == 201, upload.text

    avatar_job = client.post(f"/sessions/{session_id}/character/avatar")
    assert avatar_job.status_code == 202, avatar_job.text
    assert poll_job(client, avatar_job.json()["job_id"])["state"] == "done"

    confirmed = client.post(f"/sessions/{session_id}/character/confirm", json={"name": "Mei"})
    assert confirmed.status_code == 200, confirmed.text

    inputs = {
        1: "I want to join the astronomy club",
        2: "A retired astronomer moves in next door",
        3: "The club is about to be shut down for lack of members",
        4: "Organize a star-gazing night to recruit new members",
    }
    for chapter in range(1, 5):
        snapshot = client.get(f"/sessions/{session_id}").json()
        assert snapshot["phase"] == f"chapter_{chapter}:awaiting_input", snapshot["phase"]
        role = snapshot["current_turn"]
        started = client.post(
            f"/sessions/{session_id}/chapters/{chapter}/input",
            json={"text": inputs[chapter]},
            headers={"X-Participant-Token": tokens[role]},
        )
        assert started.status_code == 202, started.text
        assert poll_job(client, started.json()["job_id"])["state"] == "done"
        accepted = client.post(
            f"/sessions/{session_id}/chapters/{chapter}/accept",
            headers={"X-Participant-Token": tokens["protagonist"]},
        )
        assert accepted.status_code == 200, accepted.text

    export = client.get(f"/sessions/{session_id}/export", params={"format": "json"})
    assert export.status_code == 200, export.text
    return {"session_id": session_id, "tokens": tokens, "export_json": export.content}
