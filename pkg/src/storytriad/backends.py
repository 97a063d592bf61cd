"""Uniform text/image generation backends: remote HTTP adapters plus a mock.

The mock backends are pure functions of the request bytes, which makes whole
sessions reproducible offline: the same script always yields the same story
and the same images. Remote adapters speak a small JSON protocol (documented
on each adapter) so any compatible service can be plugged in via config; the
API key is read from an environment variable, never from the config file.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import threading
from dataclasses import dataclass

import httpx
from PIL import Image, ImageDraw
from PIL.PngImagePlugin import PngInfo

from .errors import (
    ConfigError,
    EmptyResponse,
    RemoteError,
    Timeout,
)
from .images import BlobStore, ImageRef

DEFAULT_MAX_IN_FLIGHT = 4
MOCK_IMAGE_SIZE = (768, 768)


@dataclass(frozen=True)
class TraceInfo:
    """Ties every request to the session, chapter and agent that issued it."""

    session_id: str
    chapter_index: int
    agent: str

    def __post_init__(self) -> None:
        if not self.session_id or not self.agent:
            raise ConfigError("trace requires a session id and an agent name")

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "chapter_index": self.chapter_index,
            "agent": self.agent,
        }


@dataclass(frozen=True)
class TextRequest:
    system_directive: str
    user_message: str
    trace: TraceInfo
    max_length: int = 4000

    def __post_init__(self) -> None:
        if self.max_length <= 0:
            raise ConfigError("max_length must be positive")

    def to_dict(self) -> dict:
        return {
            "system_directive": self.system_directive,
            "user_message": self.user_message,
            "trace": self.trace.to_dict(),
            "max_length": self.max_length,
        }


@dataclass(frozen=True)
class ImageRequest:
    prompt: str
    reference_image: ImageRef | None
    style_tokens: str
    trace: TraceInfo

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "reference_image": (
                self.reference_image.to_dict() if self.reference_image else None
            ),
            "style_tokens": self.style_tokens,
            "trace": self.trace.to_dict(),
        }


@dataclass(frozen=True)
class BackendDescriptor:
    id: str
    kind: str  # "text" | "image"
    endpoint: str  # URL, or "mock"
    timeout_ms: int = 60_000
    retry_limit: int = 3  # total attempts, not extra retries

    def __post_init__(self) -> None:
        if self.kind not in ("text", "image"):
            raise ConfigError(f"backend kind must be text or image, got {self.kind!r}")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.retry_limit < 1:
            raise ConfigError("retry_limit must be at least 1")


def request_fingerprint(request: TextRequest | ImageRequest) -> str:
    """Canonical sha256 of a request; the mock's only source of randomness."""
    blob = json.dumps(request.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class _Backend:
    """Shared in-flight limiting; concrete backends implement ``_generate``."""

    def __init__(self, descriptor: BackendDescriptor, max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        self.descriptor = descriptor
        self._gate = threading.BoundedSemaphore(max_in_flight)


# --- mock backends --------------------------------------------------------------

_MOCK_OPENERS = (
    "The morning opened quietly",
    "Nobody expected what came next",
    "The days settled into a rhythm",
    "Word travelled fast",
    "A small decision changed everything",
    "The plan took shape slowly",
    "It rained the whole afternoon",
    "Friends gathered after class",
)


def _echo_line(user_message: str, limit: int = 140) -> str:
    lines = [ln.strip() for ln in user_message.splitlines() if ln.strip()]
    echo = lines[-1] if lines else ""
    return echo[:limit]


class MockTextBackend(_Backend):
    """Deterministic stand-in for a writing model.

    Output is a pure function of the request bytes: four short paragraphs of
    templated prose that echo the final line of the user message (which the
    pipeline arranges to be the player's input) and embed a fingerprint
    fragment for traceability.
    """

    def __init__(self, backend_id: str = "mock-text", max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        super().__init__(
            BackendDescriptor(id=backend_id, kind="text", endpoint="mock"), max_in_flight
        )

    def generate(self, request: TextRequest) -> str:
        with self._gate:
            digest = bytes.fromhex(request_fingerprint(request))
            echo = _echo_line(request.user_message)
            paragraphs = []
            for i in range(4):
                opener = _MOCK_OPENERS[digest[i] % len(_MOCK_OPENERS)]
                tag = digest[4 + 4 * i : 8 + 4 * i].hex()
                paragraphs.append(
                    f'{opener}, and the thread of "{echo}" wove itself further '
                    f"into the story. [{tag}]"
                )
            return "\n\n".join(paragraphs)


def _mock_png(digest: bytes, caption: str, base_image: Image.Image | None = None) -> bytes:
    if base_image is None:
        img = Image.new("RGB", MOCK_IMAGE_SIZE, tuple(digest[0:3]))
        draw = ImageDraw.Draw(img)
        band_height = MOCK_IMAGE_SIZE[1] // 8
        for i in range(4):
            color = tuple(digest[3 + 3 * i : 6 + 3 * i])
            top = (digest[15 + i] % 7) * band_height
            draw.rectangle([0, top, MOCK_IMAGE_SIZE[0], top + band_height], fill=color)
    else:
        img = base_image
    meta = PngInfo()
    meta.add_text("caption", caption)
    buf = io.BytesIO()
    img.save(buf, format="PNG", pnginfo=meta)
    return buf.getvalue()


class MockImageBackend(_Backend):
    """Deterministic stand-in for a drawing model.

    Produces 768x768 PNG placeholders whose pixels and embedded caption are
    derived from the request fingerprint; requests carrying a reference image
    get its hash echoed into the caption so avatar consistency is traceable.
    """

    def __init__(self, backend_id: str = "mock-image", max_in_flight: int = DEFAULT_MAX_IN_FLIGHT):
        super().__init__(
            BackendDescriptor(id=backend_id, kind="image", endpoint="mock"), max_in_flight
        )

    def generate(self, request: ImageRequest) -> tuple[bytes, str]:
        with self._gate:
            fingerprint = request_fingerprint(request)
            digest = bytes.fromhex(fingerprint)
            caption = f"mock:{fingerprint[:16]}"
            if request.reference_image is not None:
                caption += f" ref:{request.reference_image.content_address[:16]}"
            return _mock_png(digest, caption), "png"

    def stylize(
        self, source: bytes, source_media_type: str, style_tokens: str, trace: TraceInfo
    ) -> tuple[bytes, str]:
        """Recolor plus border: a visible transform that keeps the source's
        structure, so feature preservation stays testable as a positive pixel
        correlation with the original."""
        with self._gate:
            digest = hashlib.sha256(
                hashlib.sha256(source).digest() + style_tokens.encode("utf-8")
            ).digest()
            with Image.open(io.BytesIO(source)) as raw:
                img = raw.convert("RGB").resize(MOCK_IMAGE_SIZE)
            # per-channel linear remap with positive slope keeps correlation > 0
            factors = [0.5 + (digest[i] % 64) / 128 for i in range(3)]
            offsets = [digest[3 + i] % 64 for i in range(3)]
            channels = [
                ch.point(lambda v, f=factors[i], o=offsets[i]: min(255, int(v * f + o)))
                for i, ch in enumerate(img.split())
            ]
            img = Image.merge("RGB", channels)
            draw = ImageDraw.Draw(img)
            border_color = tuple(digest[6:9])
            for inset in range(16):
                draw.rectangle(
                    [inset, inset, MOCK_IMAGE_SIZE[0] - 1 - inset, MOCK_IMAGE_SIZE[1] - 1 - inset],
                    outline=border_color,
                )
            caption = f"stylized:{digest[:8].hex()} style:{style_tokens[:40]}"
            return _mock_png(digest, caption, base_image=img), "png"


# --- remote HTTP adapters ---------------------------------------------------------

def _auth_headers(api_key_env: str | None) -> dict[str, str]:
    if not api_key_env:
        return {}
    key = os.environ.get(api_key_env, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


class _HttpAdapter(_Backend):
    def __init__(
        self,
        descriptor: BackendDescriptor,
        *,
        model: str = "",
        api_key_env: str | None = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__(descriptor, max_in_flight)
        self.model = model
        self.api_key_env = api_key_env
        self._client = httpx.Client(transport=transport)

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict) -> dict:
        """POST with per-attempt timeout; 429/5xx/transport errors are retried
        until retry_limit total attempts, other 4xx fail immediately."""
        desc = self.descriptor
        timeout_s = desc.timeout_ms / 1000.0
        headers = _auth_headers(self.api_key_env)
        failure: Exception = RemoteError(0, "no attempts made")
        for _ in range(desc.retry_limit):
            try:
                response = self._client.post(
                    desc.endpoint, json=body, headers=headers, timeout=timeout_s
                )
            except httpx.TimeoutException:
                failure = Timeout(f"backend {desc.id} timed out after {desc.timeout_ms} ms")
                continue
            except httpx.HTTPError as exc:
                failure = RemoteError(0, f"transport error: {exc}")
                continue
            if response.status_code == 429 or response.status_code >= 500:
                failure = RemoteError(response.status_code)
                continue
            if response.status_code >= 400:
                raise RemoteError(response.status_code)
            try:
                return response.json()
            except ValueError:
                raise EmptyResponse(f"backend {desc.id} returned a non-JSON body") from None
        raise failure


class HttpTextBackend(_HttpAdapter):
    """Adapter for a JSON text-generation endpoint.

    Request body:  {"model", "system", "prompt", "max_chars", "trace"}
    Response body: {"text": "..."}
    """

    def generate(self, request: TextRequest) -> str:
        with self._gate:
            body = {
                "model": self.model,
                "system": request.system_directive,
                "prompt": request.user_message,
                "max_chars": request.max_length,
                "trace": request.trace.to_dict(),
            }
            data = self._post(body)
            return str(data.get("text", ""))


class HttpImageBackend(_HttpAdapter):
    """Adapter for a JSON image-generation endpoint.

    Request body:  {"model", "mode": "generate"|"stylize", "prompt", "style",
                    "reference_image"/"source_image": base64 or null, "trace"}
    Response body: {"image": base64, "media_type": "png"|"jpeg"}
    """

    def __init__(self, *args, reference_loader=None, **kwargs):
        super().__init__(*args, **kwargs)
        # resolves a reference ImageRef to bytes when building requests
        self._reference_loader = reference_loader

    def _decode(self, data: dict) -> tuple[bytes, str]:
        image_b64 = data.get("image")
        if not image_b64:
            raise EmptyResponse(f"backend {self.descriptor.id} returned no image")
        return base64.b64decode(image_b64), str(data.get("media_type", "png"))

    def generate(self, request: ImageRequest) -> tuple[bytes, str]:
        with self._gate:
            reference_b64 = None
            if request.reference_image is not None and self._reference_loader is not None:
                reference_b64 = base64.b64encode(
                    self._reference_loader(request.reference_image.content_address)
                ).decode("ascii")
            body = {
                "model": self.model,
                "mode": "generate",
                "prompt": request.prompt,
                "style": request.style_tokens,
                "reference_image": reference_b64,
                "trace": request.trace.to_dict(),
            }
            return self._decode(self._post(body))

    def stylize(
        self, source: bytes, source_media_type: str, style_tokens: str, trace: TraceInfo
    ) -> tuple[bytes, str]:
        with self._gate:
            body = {
                "model": self.model,
                "mode": "stylize",
                "source_image": base64.b64encode(source).decode("ascii"),
                "source_media_type": source_media_type,
                "style": style_tokens,
                "trace": trace.to_dict(),
            }
            return self._decode(self._post(body))


# --- backend operations -------------------------------------------------------

def truncate_at_paragraph(text: str, max_length: int) -> str:
    """Clip text to max_length, preferring the last blank-line boundary."""
    if len(text) <= max_length:
        return text
    clipped = text[:max_length]
    boundary = clipped.rfind("\n\n")
    return clipped[:boundary].rstrip() if boundary > 0 else clipped.rstrip()


def _require_kind(backend: _Backend, kind: str) -> None:
    if backend.descriptor.kind != kind:
        raise ConfigError(
            f"backend {backend.descriptor.id!r} is {backend.descriptor.kind}, expected {kind}"
        )


def generate_text(backend, request: TextRequest) -> str:
    _require_kind(backend, "text")
    raw = backend.generate(request)
    if not raw or not raw.strip():
        raise EmptyResponse(f"backend {backend.descriptor.id} returned empty text")
    return truncate_at_paragraph(raw, request.max_length)


def generate_image(backend, request: ImageRequest, store: BlobStore) -> ImageRef:
    _require_kind(backend, "image")
    data, media_type = backend.generate(request)
    return store.put(data, media_type)


def stylize_avatar(
    backend, source: ImageRef, style_tokens: str, store: BlobStore, *, trace: TraceInfo
) -> ImageRef:
    _require_kind(backend, "image")
    source_bytes = store.get(source.content_address)  # raises MissingImage
    data, media_type = backend.stylize(source_bytes, source.media_type, style_tokens, trace)
    return store.put(data, media_type)


# --- configuration ----------------------------------------------------------------

def _adapter_from_config(section: dict, kind: str, origin: str):
    try:
        descriptor = BackendDescriptor(
            id=str(section.get("id", f"remote-{kind}")),
            kind=kind,
            endpoint=str(section["endpoint"]),
            timeout_ms=int(section.get("timeout_ms", 60_000)),
            retry_limit=int(section.get("retry_limit", 3)),
        )
    except KeyError as exc:
        raise ConfigError(f"{origin}: missing backend field {exc}") from None
    common = {
        "model": str(section.get("model", "")),
        "api_key_env": section.get("api_key_env"),
        "max_in_flight": int(section.get("max_in_flight", DEFAULT_MAX_IN_FLIGHT)),
    }
    if kind == "text":
        return HttpTextBackend(descriptor, **common)
    return HttpImageBackend(descriptor, **common)


def build_backends(*, mock: bool, config_path=None):
    """Return (text_backend, image_backend) from config or the mock pair."""
    if mock:
        return MockTextBackend(), MockImageBackend()
    if config_path is None:
        raise ConfigError("remote backends need --backend-config (or pass --mock)")
    try:
        config = json.loads(open(config_path, encoding="utf-8").read())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read backend config {config_path}: {exc}") from None
    if "text" not in config or "image" not in config:
        raise ConfigError(f"{config_path}: backend config needs 'text' and 'image' sections")
    return (
        _adapter_from_config(config["text"], "text", str(config_path)),
        _adapter_from_config(config["image"], "image", str(config_path)),
    )
