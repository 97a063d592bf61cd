"""HTTP/JSON boundary: the endpoint set the companion UI drives sessions with.

Rejections surface as ``{code, message, phase}`` bodies whose codes mirror the
engine's error names exactly. POSTs honour an ``Idempotency-Key`` header: a
retried request with the same key returns the original response instead of
re-applying the effect. Participant identity travels in the
``X-Participant-Token`` header issued when the participant joins.
"""

from __future__ import annotations

import threading
import time
from contextlib import asynccontextmanager
from typing import Literal

from fastapi import FastAPI, Header, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.middleware.base import BaseHTTPMiddleware

from .errors import (
    BackendFailure,
    EmptyResponse,
    IllegalTransition,
    InvalidInput,
    InvalidName,
    MissingImage,
    NoAvatar,
    NoSourceImage,
    RemoteError,
    RoleTaken,
    StorytriadError,
    Timeout,
    TooLarge,
    UnconfirmedCharacter,
    UnknownJob,
    UnknownParticipant,
    UnknownScenario,
    UnknownSession,
    UnsupportedMedia,
    WrongActor,
    WrongPhase,
)
from .service import ServiceConfig, SessionService
from .session import Clock

_STATUS_BY_ERROR = {
    WrongPhase: 409,
    WrongActor: 403,
    RoleTaken: 409,
    IllegalTransition: 409,
    UnknownSession: 404,
    UnknownScenario: 404,
    UnknownParticipant: 404,
    UnknownJob: 404,
    MissingImage: 404,
    InvalidInput: 400,
    InvalidName: 400,
    UnsupportedMedia: 415,
    TooLarge: 413,
    NoSourceImage: 409,
    NoAvatar: 409,
    UnconfirmedCharacter: 409,
    Timeout: 504,
    BackendFailure: 502,
    RemoteError: 502,
    EmptyResponse: 502,
}


class CreateSessionBody(BaseModel):
    session_id: str | None = Field(default=None, pattern=r"^[a-z0-9_\-]{1,64}$")


class ScenarioBody(BaseModel):
    scenario_id: str


class ParticipantBody(BaseModel):
    display_name: str
    is_facilitator: bool = False


class RoleBody(BaseModel):
    participant_id: str
    role: str


class ConfirmBody(BaseModel):
    name: str


class InputBody(BaseModel):
    text: str


class IdempotencyMiddleware(BaseHTTPMiddleware):
    """At-most-once POST effects keyed on the Idempotency-Key header."""

    def __init__(self, app):
        super().__init__(app)
        self._cache: dict[tuple[str, str, str], tuple[int, bytes, str]] = {}
        self._lock = threading.Lock()

    async def dispatch(self, request: Request, call_next):
        key = request.headers.get("Idempotency-Key")
        if request.method != "POST" or not key:
            return await call_next(request)
        cache_key = (request.method, request.url.path, key)
        with self._lock:
            hit = self._cache.get(cache_key)
        if hit is not None:
            status, body, media_type = hit
            return Response(content=body, status_code=status, media_type=media_type)
        response = await call_next(request)
        body = b"".join([chunk async for chunk in response.body_iterator])
        with self._lock:
            self._cache[cache_key] = (
                response.status_code,
                body,
                response.headers.get("content-type", "application/json"),
            )
        return Response(
            content=body,
            status_code=response.status_code,
            headers=dict(response.headers),
        )


def create_app(
    config: ServiceConfig | None = None,
    *,
    service: SessionService | None = None,
    clock: Clock = time.time,
) -> FastAPI:
    if service is None:
        if config is None:
            raise ValueError("create_app needs a config or a service")
        service = SessionService(config, clock=clock)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        service.shutdown()

    app = FastAPI(title="storytriad", lifespan=lifespan)
    app.state.service = service
    app.add_middleware(IdempotencyMiddleware)

    @app.exception_handler(StorytriadError)
    async def handle_engine_error(request: Request, exc: StorytriadError):
        status = _STATUS_BY_ERROR.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "phase": exc.phase},
        )

    # --- sessions -----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None):
        return service.create(body.session_id if body else None)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return service.snapshot(session_id)

    @app.post("/sessions/{session_id}/scenario")
    def select_scenario(session_id: str, body: ScenarioBody):
        return service.select_scenario(session_id, body.scenario_id)

    @app.post("/sessions/{session_id}/participants", status_code=201)
    def add_participant(session_id: str, body: ParticipantBody):
        return service.add_participant(session_id, body.display_name, body.is_facilitator)

    @app.post("/sessions/{session_id}/roles")
    def assign_role(session_id: str, body: RoleBody):
        return service.assign_role(session_id, body.participant_id, body.role)

    # --- character ------------------------------------------------------------

    @app.post("/sessions/{session_id}/character/source", status_code=201)
    async def upload_character_source(session_id: str, request: Request):
        content_type = request.headers.get("content-type", "")
        media_type = {"image/png": "png", "image/jpeg": "jpeg"}.get(content_type)
        if media_type is None:
            raise UnsupportedMedia(
                f"content type must be image/png or image/jpeg, got {content_type!r}"
            )
        data = await request.body()
        return service.ingest_character_source(session_id, data, media_type)

    @app.post("/sessions/{session_id}/character/avatar", status_code=202)
    def start_avatar(session_id: str):
        return {"job_id": service.start_avatar_job(session_id)}

    @app.post("/sessions/{session_id}/character/confirm")
    def confirm_character(session_id: str, body: ConfirmBody):
        return service.confirm_character(session_id, body.name)

    # --- chapters ---------------------------------------------------------------

    @app.post("/sessions/{session_id}/chapters/{chapter}/input", status_code=202)
    def submit_input(
        session_id: str,
        chapter: int,
        body: InputBody,
        x_participant_token: str | None = Header(default=None),
    ):
        job_id = service.submit_chapter_input(
            session_id, x_participant_token, chapter, body.text
        )
        return {"job_id": job_id}

    @app.post("/sessions/{session_id}/chapters/{chapter}/accept")
    def accept_segment(
        session_id: str,
        chapter: int,
        x_participant_token: str | None = Header(default=None),
    ):
        return service.accept_segment(session_id, x_participant_token, chapter)

    @app.post("/sessions/{session_id}/chapters/{chapter}/regenerate", status_code=202)
    def regenerate_segment(
        session_id: str,
        chapter: int,
        x_participant_token: str | None = Header(default=None),
    ):
        job_id = service.request_regeneration(session_id, x_participant_token, chapter)
        return {"job_id": job_id}

    # --- jobs, images, export ------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        return service.job_status(job_id)

    @app.get("/images/{content_address}")
    def get_image(content_address: str):
        data, content_type = service.image_bytes(content_address)
        return Response(content=data, media_type=content_type)

    @app.get("/sessions/{session_id}/export")
    def export_session(session_id: str, format: Literal["json", "html"] = "json"):
        data, content_type = service.export(session_id, format)
        return Response(content=data, media_type=content_type)

    @app.get("/scenarios")
    def list_scenarios():
        return service.list_scenarios()

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service under uvicorn; raises BindError if the port is taken."""
    import socket

    import uvicorn

    from .errors import BindError

    app = create_app(config)  # ConfigError surfaces before binding anything
    try:
        probe = socket.socket()
        probe.bind((config.host, config.port))
        probe.close()
    except OSError as exc:
        raise BindError(f"cannot bind {config.host}:{config.port}: {exc}") from None
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise BindError(f"cannot serve on {config.host}:{config.port}: {exc}") from None
