"""Content-addressed storage for uploaded and generated images.

Blobs are identified by the sha256 of their bytes, so storing the same image
twice is a no-op and references stay verifiable after crashes or copies.
"""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .errors import MissingImage, UnsupportedMedia

_EXTENSIONS = {"png": "png", "jpeg": "jpg"}
_PIL_FORMATS = {"PNG": "png", "JPEG": "jpeg"}


@dataclass(frozen=True)
class ImageRef:
    """Stable handle to a stored image: hash of bytes plus display metadata."""

    content_address: str
    media_type: str  # "png" | "jpeg"
    width: int
    height: int

    def to_dict(self) -> dict:
        return {
            "content_address": self.content_address,
            "media_type": self.media_type,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImageRef":
        return cls(
            content_address=data["content_address"],
            media_type=data["media_type"],
            width=int(data["width"]),
            height=int(data["height"]),
        )


def content_address(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def probe_image(data: bytes) -> tuple[str, int, int]:
    """Return (media_type, width, height) or raise UnsupportedMedia."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
            width, height = img.size
    except (UnidentifiedImageError, OSError) as exc:
        raise UnsupportedMedia(f"bytes do not decode as png or jpeg: {exc}") from None
    media_type = _PIL_FORMATS.get(fmt or "")
    if media_type is None:
        raise UnsupportedMedia(f"unsupported image format: {fmt}")
    return media_type, width, height


class BlobStore:
    """Directory of content-addressed image files (``<sha256>.<ext>``)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, address: str, media_type: str) -> Path:
        return self.root / f"{address}.{_EXTENSIONS[media_type]}"

    def put(self, data: bytes, media_type: str | None = None) -> ImageRef:
        """Store bytes, probing format and dimensions. Idempotent."""
        probed_type, width, height = probe_image(data)
        if media_type is not None and media_type != probed_type:
            raise UnsupportedMedia(
                f"declared media type {media_type!r} but bytes decode as {probed_type!r}"
            )
        address = content_address(data)
        path = self._path(address, probed_type)
        if not path.exists():
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return ImageRef(address, probed_type, width, height)

    def find(self, address: str) -> Path | None:
        for ext in _EXTENSIONS.values():
            path = self.root / f"{address}.{ext}"
            if path.is_file():
                return path
        return None

    def exists(self, address: str) -> bool:
        return self.find(address) is not None

    def get(self, address: str) -> bytes:
        path = self.find(address)
        if path is None:
            raise MissingImage(address)
        return path.read_bytes()

    def media_type(self, address: str) -> str:
        path = self.find(address)
        if path is None:
            raise MissingImage(address)
        return "png" if path.suffix == ".png" else "jpeg"
