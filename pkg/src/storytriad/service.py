"""The session service: serialized session mutation plus async generation jobs.

One lock per session keeps every mutation single-writer; generation jobs run
on a thread pool and commit their results back through the same lock. Reads
take the lock too, so a snapshot is always internally consistent.
"""

from __future__ import annotations

import secrets
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .backends import build_backends, generate_text
from .character import (
    DEFAULT_STYLE_TOKENS,
    confirm_character,
    generate_avatar_image,
    ingest_source_image,
)
from .errors import (
    BackendFailure,
    IllegalTransition,
    MissingImage,
    NoSourceImage,
    StorytriadError,
    WrongActor,
    WrongPhase,
)
from .export import export_story
from .jobs import JobRegistry
from .pipeline import (
    CHAPTER_JOB_TIMEOUT_S,
    GenerationContext,
    build_question_request,
    generate_segment,
    prompt_schema,
)
from .protocol import Role, chapter_spec, render_inquiry
from .scenarios import ScenarioRegistry
from .session import (
    ChapterStep,
    Clock,
    EventKind,
    Session,
    SessionEvent,
    Stage,
    SYSTEM_ACTOR,
    apply_event,
    create_session,
    current_turn,
)
from .storage import SessionStorage


@dataclass
class ServiceConfig:
    data_dir: Path
    scenarios_dir: Path | None = None  # None -> the three bundled scenarios
    backend_config: Path | None = None
    mock: bool = False
    port: int = 8000
    host: str = "127.0.0.1"
    style_tokens: str = DEFAULT_STYLE_TOKENS
    chapter_timeout_s: float = CHAPTER_JOB_TIMEOUT_S
    question_agent_backend: bool = False  # rephrase inquiries via the text backend
    workers: int = 8

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        if self.scenarios_dir is not None:
            self.scenarios_dir = Path(self.scenarios_dir)
        if self.backend_config is not None:
            self.backend_config = Path(self.backend_config)


@dataclass
class _Entry:
    session: Session
    lock: threading.RLock = field(default_factory=threading.RLock)
    tokens: dict[str, str] = field(default_factory=dict)  # token -> participant id
    active_job: str | None = None


class SessionService:
    def __init__(
        self,
        config: ServiceConfig,
        *,
        clock: Clock = time.time,
        text_backend=None,
        image_backend=None,
    ):
        self.config = config
        self.clock = clock
        if config.scenarios_dir is not None:
            self.scenarios = ScenarioRegistry.from_directory(config.scenarios_dir)
        else:
            self.scenarios = ScenarioRegistry.bundled()
        if text_backend is None or image_backend is None:
            built_text, built_image = build_backends(
                mock=config.mock, config_path=config.backend_config
            )
            text_backend = text_backend or built_text
            image_backend = image_backend or built_image
        self.text_backend = text_backend
        self.image_backend = image_backend
        self.storage = SessionStorage(config.data_dir)
        self.jobs = JobRegistry(clock)
        self._entries: dict[str, _Entry] = {}
        self._registry_lock = threading.Lock()
        self._executor = ThreadPoolExecutor(max_workers=config.workers)

    # --- session registry -------------------------------------------------------

    def _entry(self, session_id: str) -> _Entry:
        with self._registry_lock:
            entry = self._entries.get(session_id)
            if entry is not None:
                return entry
            session = self.storage.load(session_id)  # raises UnknownSession
            entry = _Entry(session=session, tokens=self.storage.load_tokens(session_id))
            self._entries[session_id] = entry
        self._recover(entry)
        return entry

    def _recover(self, entry: _Entry) -> None:
        """A session reloaded mid-generation has lost its job: fail the chapter
        back to awaiting_input so the group can resubmit."""
        with entry.lock:
            session = entry.session
            phase = session.phase
            if phase.is_chapter and phase.step is ChapterStep.GENERATING:
                apply_event(
                    session,
                    SYSTEM_ACTOR,
                    SessionEvent(
                        EventKind.GENERATION_FAILED,
                        {
                            "chapter": phase.chapter,
                            "error": "Restart",
                            "message": "service restarted during generation",
                        },
                    ),
                    clock=self.clock,
                )
                self.storage.persist(session)

    def create(self, session_id: str | None = None) -> dict:
        if session_id is not None and (
            self.storage.exists(session_id) or session_id in self._entries
        ):
            raise IllegalTransition(f"session {session_id!r} already exists")
        session = create_session(clock=self.clock, session_id=session_id)
        entry = _Entry(session=session)
        with self._registry_lock:
            self._entries[session.id] = entry
        with entry.lock:
            self.storage.persist(session)
            return self._snapshot(entry)

    # --- snapshots ---------------------------------------------------------------

    def _snapshot(self, entry: _Entry) -> dict:
        session = entry.session
        phase = session.phase
        turn = None
        inquiry = None
        if phase.is_chapter and phase.step is ChapterStep.AWAITING_INPUT:
            turn = current_turn(session).value
            inquiry = session.current_inquiry
        scenario = None
        if session.scenario is not None:
            scenario = {
                "id": session.scenario.id,
                "title": session.scenario.title,
                "setting_description": session.scenario.setting_description,
            }
        return {
            "id": session.id,
            "phase": phase.encode(),
            "scenario": scenario,
            "participants": [p.to_dict() for p in session.participants],
            "character": session.character.to_dict() if session.character else None,
            "segments": {str(k): v.to_dict() for k, v in sorted(session.segments.items())},
            "current_turn": turn,
            "inquiry": inquiry,
            "active_job_id": entry.active_job,
            "regen_counts": {str(k): v for k, v in sorted(session.regen_counts.items())},
            "created_at": session.created_at,
            "updated_at": session.updated_at,
        }

    def snapshot(self, session_id: str) -> dict:
        entry = self._entry(session_id)
        with entry.lock:
            return self._snapshot(entry)

    def list_scenarios(self) -> list[dict]:
        return [
            {
                "id": s.id,
                "title": s.title,
                "setting_description": s.setting_description,
            }
            for s in self.scenarios.all()
        ]

    # --- setup -------------------------------------------------------------------

    def select_scenario(self, session_id: str, scenario_id: str, actor: str = SYSTEM_ACTOR) -> dict:
        scenario = self.scenarios.get(scenario_id)  # raises UnknownScenario
        entry = self._entry(session_id)
        with entry.lock:
            apply_event(
                entry.session,
                actor,
                SessionEvent(EventKind.SCENARIO_SELECTED, {"scenario": scenario.to_dict()}),
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            return self._snapshot(entry)

    def add_participant(
        self, session_id: str, display_name: str, is_facilitator: bool = False
    ) -> dict:
        entry = self._entry(session_id)
        with entry.lock:
            participant_id = f"p{len(entry.session.participants) + 1}"
            apply_event(
                entry.session,
                participant_id,
                SessionEvent(
                    EventKind.PARTICIPANT_REGISTERED,
                    {
                        "participant_id": participant_id,
                        "display_name": display_name,
                        "is_facilitator": is_facilitator,
                    },
                ),
                clock=self.clock,
            )
            token = secrets.token_urlsafe(16)
            entry.tokens[token] = participant_id
            self.storage.persist(entry.session)
            self.storage.save_tokens(session_id, entry.tokens)
            return {"participant_id": participant_id, "token": token}

    def assign_role(
        self, session_id: str, participant_id: str, role: str, actor: str = SYSTEM_ACTOR
    ) -> dict:
        try:
            parsed = Role(role)
        except ValueError:
            raise IllegalTransition(f"unknown role {role!r}") from None
        entry = self._entry(session_id)
        with entry.lock:
            apply_event(
                entry.session,
                actor,
                SessionEvent(
                    EventKind.ROLE_ASSIGNED,
                    {"participant_id": participant_id, "role": parsed.value},
                ),
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            return self._snapshot(entry)

    def resolve_actor(self, session_id: str, token: str | None) -> str:
        entry = self._entry(session_id)
        with entry.lock:
            participant_id = entry.tokens.get(token or "")
        if participant_id is None:
            raise WrongActor("missing or invalid participant token")
        return participant_id

    # --- character construction ----------------------------------------------------

    def ingest_character_source(
        self, session_id: str, data: bytes, media_type: str | None
    ) -> dict:
        entry = self._entry(session_id)
        with entry.lock:
            ref = ingest_source_image(
                entry.session,
                data,
                media_type,
                store=self.storage.blob_store(session_id),
                style_tokens=self.config.style_tokens,
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            return ref.to_dict()

    def start_avatar_job(self, session_id: str) -> str:
        entry = self._entry(session_id)
        with entry.lock:
            session = entry.session
            if session.phase.stage is not Stage.CHARACTER_CONSTRUCTION:
                raise WrongPhase(
                    f"avatar generation only during character construction "
                    f"(phase is {session.phase.encode()})",
                    phase=session.phase.encode(),
                )
            if session.character is None or session.character.source_image is None:
                raise NoSourceImage(
                    "ingest a source image first", phase=session.phase.encode()
                )
            self._claim_job_slot(entry)
            job_id = self.jobs.create("avatar")
            entry.active_job = job_id
        self._executor.submit(self._run_avatar_job, session_id, job_id)
        return job_id

    def _run_avatar_job(self, session_id: str, job_id: str) -> None:
        entry = self._entry(session_id)
        self.jobs.mark_running(job_id)
        try:
            with entry.lock:
                ref = generate_avatar_image(
                    entry.session,
                    image_backend=self.image_backend,
                    store=self.storage.blob_store(session_id),
                    clock=self.clock,
                )
                self.storage.persist(entry.session)
            self.jobs.mark_done(job_id, {"kind": "avatar", "image": ref.to_dict()})
        except StorytriadError as exc:
            self.jobs.mark_failed(job_id, exc.code, str(exc))
        except Exception as exc:  # defensive: job threads must not die silently
            self.jobs.mark_failed(job_id, "InternalError", repr(exc))
        finally:
            with entry.lock:
                entry.active_job = None

    def confirm_character(self, session_id: str, name: str) -> dict:
        entry = self._entry(session_id)
        with entry.lock:
            confirm_character(entry.session, name, clock=self.clock)
            self._present_inquiry(entry)
            self.storage.persist(entry.session)
            return self._snapshot(entry)

    # --- chapter loop ----------------------------------------------------------------

    def _present_inquiry(self, entry: _Entry) -> None:
        """Advance inquiry -> awaiting_input by computing the narrator question.

        The default path renders the scenario template directly; the backend
        path asks the text model to phrase it (same traceability either way).
        """
        session = entry.session
        phase = session.phase
        if not (phase.is_chapter and phase.step is ChapterStep.INQUIRY):
            return
        index = phase.chapter
        assert index is not None and session.scenario and session.character
        schema = prompt_schema(index)
        if self.config.question_agent_backend:
            request = build_question_request(schema, session.scenario, session.character)
            inquiry = generate_text(self.text_backend, request).strip()
            agent_path = "backend"
        else:
            inquiry = render_inquiry(
                chapter_spec(index), session.scenario, session.character.name
            )
            agent_path = "template"
        apply_event(
            session,
            SYSTEM_ACTOR,
            SessionEvent(
                EventKind.INQUIRY_PRESENTED,
                {"chapter": index, "inquiry": inquiry, "agent_path": agent_path},
            ),
            clock=self.clock,
        )

    def _claim_job_slot(self, entry: _Entry) -> None:
        if entry.active_job is not None:
            raise IllegalTransition(
                f"a generation job ({entry.active_job}) is already running for this session"
            )

    def submit_chapter_input(
        self, session_id: str, token: str | None, chapter: int, text: str
    ) -> str:
        actor = self.resolve_actor(session_id, token)
        entry = self._entry(session_id)
        with entry.lock:
            self._claim_job_slot(entry)
            apply_event(
                entry.session,
                actor,
                SessionEvent(EventKind.INPUT_SUBMITTED, {"chapter": chapter, "text": text}),
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            job_id = self.jobs.create("chapter")
            entry.active_job = job_id
        self._executor.submit(self._run_chapter_job, session_id, chapter, job_id)
        return job_id

    def _run_chapter_job(self, session_id: str, chapter: int, job_id: str) -> None:
        entry = self._entry(session_id)
        self.jobs.mark_running(job_id)
        try:
            with entry.lock:
                session = entry.session
                scenario = session.scenario
                character = session.character
                prior = tuple(session.segments[i] for i in sorted(session.segments))
                text = session.chapter_inputs[chapter]
                regenerations = session.regen_counts.get(chapter, 0)
            assert scenario is not None and character is not None
            context = GenerationContext(
                scenario=scenario,
                character=character,
                prior_segments=prior,
                current_input=text,
            )
            segment = generate_segment(
                prompt_schema(chapter),
                context,
                text_backend=self.text_backend,
                image_backend=self.image_backend,
                store=self.storage.blob_store(session_id),
                session_id=session_id,
                regenerations=regenerations,
                clock=self.clock,
                deadline_s=self.config.chapter_timeout_s,
            )
            with entry.lock:
                apply_event(
                    entry.session,
                    SYSTEM_ACTOR,
                    SessionEvent(
                        EventKind.SEGMENT_COMMITTED,
                        {"chapter": chapter, "segment": segment.to_dict()},
                    ),
                    clock=self.clock,
                )
                self.storage.persist(entry.session)
            self.jobs.mark_done(job_id, {"kind": "segment", "chapter": chapter})
        except StorytriadError as exc:
            kind = exc.kind if isinstance(exc, BackendFailure) else exc.code
            self._fail_chapter(entry, chapter, kind, str(exc))
            self.jobs.mark_failed(job_id, kind, str(exc))
        except Exception as exc:  # defensive: job threads must not die silently
            self._fail_chapter(entry, chapter, "InternalError", repr(exc))
            self.jobs.mark_failed(job_id, "InternalError", repr(exc))
        finally:
            with entry.lock:
                entry.active_job = None

    def _fail_chapter(self, entry: _Entry, chapter: int, kind: str, message: str) -> None:
        with entry.lock:
            session = entry.session
            phase = session.phase
            if phase.is_chapter and phase.step is ChapterStep.GENERATING:
                apply_event(
                    session,
                    SYSTEM_ACTOR,
                    SessionEvent(
                        EventKind.GENERATION_FAILED,
                        {"chapter": chapter, "error": kind, "message": message},
                    ),
                    clock=self.clock,
                )
                self.storage.persist(session)

    def accept_segment(self, session_id: str, token: str | None, chapter: int) -> dict:
        actor = self.resolve_actor(session_id, token)
        entry = self._entry(session_id)
        with entry.lock:
            apply_event(
                entry.session,
                actor,
                SessionEvent(EventKind.SEGMENT_ACCEPTED, {"chapter": chapter}),
                clock=self.clock,
            )
            self._present_inquiry(entry)
            self.storage.persist(entry.session)
            return self._snapshot(entry)

    def request_regeneration(self, session_id: str, token: str | None, chapter: int) -> str:
        actor = self.resolve_actor(session_id, token)
        entry = self._entry(session_id)
        with entry.lock:
            self._claim_job_slot(entry)
            apply_event(
                entry.session,
                actor,
                SessionEvent(EventKind.REGENERATION_REQUESTED, {"chapter": chapter}),
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            job_id = self.jobs.create("chapter")
            entry.active_job = job_id
        self._executor.submit(self._run_chapter_job, session_id, chapter, job_id)
        return job_id

    # --- presentation / export -------------------------------------------------------

    def close_session(self, session_id: str, actor: str = SYSTEM_ACTOR) -> dict:
        entry = self._entry(session_id)
        with entry.lock:
            apply_event(
                entry.session,
                actor,
                SessionEvent(EventKind.SESSION_CLOSED, {}),
                clock=self.clock,
            )
            self.storage.persist(entry.session)
            return self._snapshot(entry)

    def export(self, session_id: str, fmt: str) -> tuple[bytes, str]:
        entry = self._entry(session_id)
        with entry.lock:
            data = export_story(
                entry.session, fmt, self.storage.blob_store(session_id)
            )
        content_type = "application/json" if fmt == "json" else "text/html; charset=utf-8"
        return data, content_type

    # --- jobs / images -----------------------------------------------------------------

    def job_status(self, job_id: str) -> dict:
        return self.jobs.get(job_id)

    def image_bytes(self, content_address: str) -> tuple[bytes, str]:
        path = self.storage.find_blob(content_address)
        if path is None:
            raise MissingImage(content_address)
        media = "png" if path.suffix == ".png" else "jpeg"
        return path.read_bytes(), f"image/{media}"

    def shutdown(self) -> None:
        """Let in-flight jobs finish, then fail anything still queued."""
        self._executor.shutdown(wait=True)
        self.jobs.fail_active("Shutdown")
