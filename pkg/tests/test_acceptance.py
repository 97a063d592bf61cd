"""Acceptance suite: one test per release criterion, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion lines.
Every tolerance is pinned here; nothing is deferred to later calibration.
"""

from __future__ import annotations

import json
import math
import itertools
import os
import random
import signal
import socket
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import httpx
import numpy as np
from fastapi.testclient import TestClient
from helpers import TickClock, fake_ref_dict, png_bytes, run_scripted_session, segment_payload

from storytriad.analytics import cronbach_alpha, paired_t, score_chs, t_to_p
from storytriad.api import create_app
from storytriad.errors import ZeroVariance
from storytriad.service import ServiceConfig
from storytriad.session import (
    ChapterStep,
    EventKind,
    SessionEvent,
    apply_event,
    create_session,
    replay_events,
)
from storytriad.storage import SessionStorage


@contextmanager
def criterion(name: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        print(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
        raise
    else:
        print(f"[PASS] {name} ({time.perf_counter() - started:.2f}s)")


# --- criterion 1: p-value reproduction -------------------------------------------


class TestPValueReproduction:
    def test_reported_p_values_within_tolerance(self):
        with criterion("p-value reproduction (0.013 / 0.044 / 0.066 at df=19)"):
            cases = [(2.74, 19, 0.013), (2.15, 19, 0.044), (1.95, 19, 0.066)]
            for t, df, expected in cases:
                assert abs(t_to_p(t, df) - expected) <= 1e-3, (t, df)
            # runtime: well under 1 ms per call
            for t, df, _ in cases:
                t_to_p(t, df)  # warm
                started = time.perf_counter()
                for _ in range(1000):
                    t_to_p(t, df)
                per_call = (time.perf_counter() - started) / 1000
                assert per_call < 1e-3, f"t_to_p took {per_call * 1e3:.3f} ms"


# --- criterion 2: statistics oracle suite ------------------------------------------


class TestStatisticsOracleSuite:
    def test_thousand_datasets_and_matrices(self):
        with criterion("statistics oracle suite (1000 datasets + 1000 matrices, 1e-9)"):
            started = time.perf_counter()
            rng = random.Random(20240817)

            for _ in range(1000):
                n = rng.randint(2, 50)
                pre = [rng.uniform(-20, 60) for _ in range(n)]
                post = [p + rng.uniform(-6, 9) for p in pre]
                try:
                    result = paired_t(pre, post)
                except ZeroVariance:
                    continue
                arr_pre = np.asarray(pre)
                arr_post = np.asarray(post)
                d = arr_post - arr_pre
                sd_d = d.std(ddof=1)
                t_oracle = d.mean() / (sd_d / math.sqrt(n))
                d_z_oracle = d.mean() / sd_d
                d_av_oracle = d.mean() / ((arr_pre.std(ddof=1) + arr_post.std(ddof=1)) / 2)
                assert abs(result.t - t_oracle) <= 1e-9
                assert abs(result.d_z - d_z_oracle) <= 1e-9
                assert abs(result.d_av - d_av_oracle) <= 1e-9

                # shift and scale invariance on every sampled case
                shift = rng.uniform(-100, 100)
                scale = rng.uniform(0.1, 10)
                shifted = paired_t([a + shift for a in pre], [b + shift for b in post])
                scaled = paired_t([a * scale for a in pre], [b * scale for b in post])
                assert abs(shifted.t - result.t) <= max(1e-9, 1e-9 * abs(result.t))
                assert abs(scaled.t - result.t) <= max(1e-9, 1e-9 * abs(result.t))
                assert abs(scaled.d_z - result.d_z) <= 1e-9

            checked = 0
            while checked < 1000:
                n = rng.randint(2, 25)
                k = rng.randint(2, 8)
                matrix = [[rng.randint(1, 7) for _ in range(k)] for _ in range(n)]
                m = np.asarray(matrix, dtype=float)
                total_var = m.sum(axis=1).var(ddof=1)
                if total_var == 0:
                    continue
                alpha_oracle = (k / (k - 1)) * (1 - m.var(axis=0, ddof=1).sum() / total_var)
                assert abs(cronbach_alpha(matrix).alpha - alpha_oracle) <= 1e-9
                checked += 1

            elapsed = time.perf_counter() - started
            assert elapsed < 10.0, f"oracle suite took {elapsed:.1f}s (limit 10s)"


# --- criterion 3: state-machine property suite ---------------------------------------


ROLE_OF_CHAPTER = {1: "protagonist", 2: "opportunity", 3: "challenge", 4: "protagonist"}

_SCENARIO_PAYLOAD = {
    "scenario": {
        "id": "walk",
        "title": "Walk",
        "setting_description": "synthetic",
        "chapter_inquiry_templates": {str(i): "{protagonist_name}?" for i in range(1, 5)},
    }
}


def _random_event(rng: random.Random):
    kind = rng.choice(_EVENT_KINDS)
    chapter = rng.randint(1, 4)
    if kind is EventKind.SCENARIO_SELECTED:
        payload = _SCENARIO_PAYLOAD
    elif kind is EventKind.PARTICIPANT_REGISTERED:
        payload = {"participant_id": f"p{rng.randint(1, 4)}", "display_name": "X"}
    elif kind is EventKind.ROLE_ASSIGNED:
        payload = {
            "participant_id": f"p{rng.randint(1, 4)}",
            "role": rng.choice(["protagonist", "opportunity", "challenge"]),
        }
    elif kind is EventKind.SOURCE_INGESTED:
        payload = {"image": fake_ref_dict(rng.randint(1, 9)), "style_tokens": "s"}
    elif kind is EventKind.AVATAR_GENERATED:
        payload = {"image": fake_ref_dict(rng.randint(1, 9))}
    elif kind is EventKind.CHARACTER_CONFIRMED:
        payload = {"name": rng.choice(["Mei", "Sam", ""])}
    elif kind is EventKind.INQUIRY_PRESENTED:
        payload = {"chapter": chapter, "inquiry": "Q?"}
    elif kind is EventKind.INPUT_SUBMITTED:
        payload = {"chapter": chapter, "text": rng.choice(["an idea", "", "another one"])}
    elif kind is EventKind.SEGMENT_COMMITTED:
        payload = segment_payload(chapter)
    elif kind is EventKind.GENERATION_FAILED:
        payload = {"chapter": chapter, "error": "Timeout", "message": "m"}
    else:  # accepted / regeneration / closed
        payload = {"chapter": chapter}
    actor = rng.choice(["p1", "p2", "p3", "facilitator", "system", "ghost"])
    return actor, SessionEvent(kind, payload)


_EVENT_KINDS = [k for k in EventKind if k is not EventKind.CREATED]


class TestStateMachinePropertySuite:
    def test_ten_thousand_random_sequences(self):
        with criterion("state-machine property suite (10,000 random event sequences)"):
            started = time.perf_counter()
            rng = random.Random(99)
            clock = TickClock()
            violations = 0
            for run in range(10_000):
                session = create_session(clock=clock, session_id=f"w{run}")
                last_rank = session.phase.major_rank()
                for _ in range(rng.randint(10, 30)):
                    actor, event = _random_event(rng)
                    try:
                        apply_event(session, actor, event, clock=clock)
                    except Exception:
                        continue

                    # turn ownership: accepted inputs only from the owning role
                    if event.kind is EventKind.INPUT_SUBMITTED:
                        owner = ROLE_OF_CHAPTER[event.payload["chapter"]]
                        participant = session.participant(actor)
                        if participant is None or participant.role.value != owner:
                            violations += 1

                    # chapter-prefix: segments are always a gap-free prefix
                    keys = sorted(session.segments)
                    if keys != list(range(1, len(keys) + 1)):
                        violations += 1
                    if session.phase.is_chapter:
                        reached = session.phase.chapter
                        expected = set(range(1, reached))
                        if session.phase.step is ChapterStep.REVIEW:
                            expected.add(reached)
                        if set(session.segments) != expected:
                            violations += 1

                    # monotone major stages
                    rank = session.phase.major_rank()
                    if rank < last_rank:
                        violations += 1
                    last_rank = rank
            elapsed = time.perf_counter() - started
            assert violations == 0, f"{violations} invariant violations"
            assert elapsed < 30.0, f"property suite took {elapsed:.1f}s (limit 30s)"


# --- criterion 4: mock end-to-end -----------------------------------------------------


class TestMockEndToEnd:
    def test_scripted_session_twice_is_byte_identical(self, tmp_path):
        with criterion("mock end-to-end (16 paragraphs, 16 illustrations, 1 avatar, "
                       "byte-identical reruns)"):
            started = time.perf_counter()
            exports = []
            for run in ("a", "b"):
                app = create_app(
                    ServiceConfig(data_dir=tmp_path / run, mock=True), clock=TickClock()
                )
                with TestClient(app) as client:
                    result = run_scripted_session(client, "acceptance")
                    exports.append(result["export_json"])

            document = json.loads(exports[0])
            paragraphs = [p for ch in document["chapters"] for p in ch["paragraphs"]]
            illustrations = [r for ch in document["chapters"] for r in ch["illustrations"]]
            assert len(document["chapters"]) == 4
            assert len(paragraphs) == 16
            assert len(illustrations) == 16
            avatar = document["character"]["avatar"]
            assert avatar and avatar["content_address"]
            assert exports[0] == exports[1], "reruns diverged byte-wise"
            elapsed = time.perf_counter() - started
            assert elapsed < 20.0, f"end-to-end took {elapsed:.1f}s (limit 20s)"


# --- criterion 5: crash recovery ---------------------------------------------------------


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def _start_server(data_dir: Path, port: int) -> subprocess.Popen:
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "storytriad", "serve",
            "--mock", "--data-dir", str(data_dir), "--port", str(port),
        ],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    deadline = time.monotonic() + 20
    while time.monotonic() < deadline:
        try:
            httpx.get(f"http://127.0.0.1:{port}/scenarios", timeout=0.5)
            return proc
        except httpx.HTTPError:
            if proc.poll() is not None:
                raise RuntimeError(f"server exited early with {proc.returncode}")
            time.sleep(0.1)
    proc.kill()
    raise RuntimeError("server did not become ready")


class TestCrashRecovery:
    def test_kill_mid_chapter_two_and_resume(self, tmp_path):
        with criterion("crash recovery (SIGKILL mid-chapter-2, replay equivalence, resume)"):
            data_dir = tmp_path / "crashdata"
            port = _free_port()
            proc = _start_server(data_dir, port)
            base = f"http://127.0.0.1:{port}"
            sid = "crash-session"
            tokens = {}
            try:
                with httpx.Client(base_url=base, timeout=10.0) as client:
                    assert client.post("/sessions", json={"session_id": sid}).status_code == 201
                    client.post(f"/sessions/{sid}/scenario", json={"scenario_id": "high_school"})
                    for name, role in [
                        ("Ada", "protagonist"), ("Ben", "opportunity"), ("Caz", "challenge")
                    ]:
                        body = client.post(
                            f"/sessions/{sid}/participants", json={"display_name": name}
                        ).json()
                        client.post(
                            f"/sessions/{sid}/roles",
                            json={"participant_id": body["participant_id"], "role": role},
                        )
                        tokens[role] = body["token"]
                    client.post(
                        f"/sessions/{sid}/character/source",
                        content=png_bytes(),
                        headers={"Content-Type": "image/png"},
                    )
                    job = client.post(f"/sessions/{sid}/character/avatar").json()["job_id"]
                    while client.get(f"/jobs/{job}").json()["state"] not in ("done", "failed"):
                        time.sleep(0.05)
                    client.post(f"/sessions/{sid}/character/confirm", json={"name": "Mei"})

                    # chapter 1 to completion
                    job = client.post(
                        f"/sessions/{sid}/chapters/1/input",
                        json={"text": "join the astronomy club"},
                        headers={"X-Participant-Token": tokens["protagonist"]},
                    ).json()["job_id"]
                    while client.get(f"/jobs/{job}").json()["state"] not in ("done", "failed"):
                        time.sleep(0.05)
                    client.post(
                        f"/sessions/{sid}/chapters/1/accept",
                        headers={"X-Participant-Token": tokens["protagonist"]},
                    )

                    # chapter 2: submit input (acknowledged), then kill immediately
                    response = client.post(
                        f"/sessions/{sid}/chapters/2/input",
                        json={"text": "a retired astronomer moves in"},
                        headers={"X-Participant-Token": tokens["opportunity"]},
                    )
                    assert response.status_code == 202
            finally:
                os.kill(proc.pid, signal.SIGKILL)
                proc.wait(timeout=10)

            # everything acknowledged before the kill is on disk
            storage = SessionStorage(data_dir)
            records_before = storage.load_records(sid)
            acked = [(r.seq, r.kind) for r in records_before]
            assert ("input_submitted" in {k for _, k in acked})
            assert any(k == "segment_accepted" for _, k in acked)

            # restart on the same data directory
            port2 = _free_port()
            proc2 = _start_server(data_dir, port2)
            try:
                with httpx.Client(base_url=f"http://127.0.0.1:{port2}", timeout=10.0) as client:
                    snapshot = client.get(f"/sessions/{sid}").json()
                    # the chapter-2 job died with the process; the session resumes
                    # at the last acknowledged phase, recovered to awaiting_input
                    # if the kill landed mid-generation
                    assert snapshot["phase"] in (
                        "chapter_2:awaiting_input", "chapter_2:review"
                    ), snapshot["phase"]
                    assert "1" in snapshot["segments"]

                    # no acknowledged event was lost
                    records_after = SessionStorage(data_dir).load_records(sid)
                    after_pairs = [(r.seq, r.kind) for r in records_after]
                    assert after_pairs[: len(acked)] == acked

                    # replaying the on-disk log reproduces the served snapshot
                    replayed = replay_events(records_after)
                    assert replayed.phase.encode() == snapshot["phase"]
                    assert sorted(replayed.segments) == sorted(
                        int(k) for k in snapshot["segments"]
                    )

                    # and the group can finish the story after the restart
                    if snapshot["phase"] == "chapter_2:awaiting_input":
                        job = client.post(
                            f"/sessions/{sid}/chapters/2/input",
                            json={"text": "a retired astronomer moves in"},
                            headers={"X-Participant-Token": tokens["opportunity"]},
                        ).json()["job_id"]
                        while client.get(f"/jobs/{job}").json()["state"] not in (
                            "done", "failed"
                        ):
                            time.sleep(0.05)
                    client.post(
                        f"/sessions/{sid}/chapters/2/accept",
                        headers={"X-Participant-Token": tokens["protagonist"]},
                    )
                    for chapter, text, role in [
                        (3, "the club may shut down", "challenge"),
                        (4, "organize a star-gazing night", "protagonist"),
                    ]:
                        job = client.post(
                            f"/sessions/{sid}/chapters/{chapter}/input",
                            json={"text": text},
                            headers={"X-Participant-Token": tokens[role]},
                        ).json()["job_id"]
                        while client.get(f"/jobs/{job}").json()["state"] not in (
                            "done", "failed"
                        ):
                            time.sleep(0.05)
                        client.post(
                            f"/sessions/{sid}/chapters/{chapter}/accept",
                            headers={"X-Participant-Token": tokens["protagonist"]},
                        )
                    export = client.get(f"/sessions/{sid}/export", params={"format": "json"})
                    assert export.status_code == 200
                    document = export.json()
                    assert len(document["chapters"]) == 4
            finally:
                os.kill(proc2.pid, signal.SIGKILL)
                proc2.wait(timeout=10)


# --- criterion 6: CHS scoring, exhaustive -----------------------------------------------


class TestChsExhaustive:
    def test_all_46656_item_vectors(self):
        with criterion("CHS scoring exhaustive (6^6 vectors: total = agency + pathways)"):
            for items in itertools.product(range(1, 7), repeat=6):
                score = score_chs(list(items))
                assert score.total == score.agency + score.pathways
                assert 6 <= score.total <= 36
                assert 3 <= score.agency <= 18
                assert 3 <= score.pathways <= 18
