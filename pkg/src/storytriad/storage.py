"""Durable session storage: append-only event log, snapshot, image blobs.

Layout, one directory per session::

    <data_dir>/sessions/<session_id>/
        events.log      one JSON record per line: {seq, timestamp, actor, event, payload}
        snapshot.json   full session state (mirror of the in-memory record)
        blobs/          content-addressed images
        tokens.json     participant capability tokens (server-side only)

The event log is the source of truth: loading replays it from scratch. Every
append is flushed and fsynced before the caller's operation is acknowledged,
so acknowledged events survive a crash; a torn trailing line (an event that
was never acknowledged) is dropped on load.
"""

from __future__ import annotations

import errno
import json
import os
from pathlib import Path

from .errors import IoError, StorageFull, UnknownSession
from .images import BlobStore
from .session import EventRecord, Session, replay_events


def _translate_os_error(exc: OSError, context: str) -> Exception:
    if exc.errno == errno.ENOSPC:
        return StorageFull(f"{context}: {exc}")
    return IoError(f"{context}: {exc}")


class SessionStorage:
    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._persisted_seq: dict[str, int] = {}

    def session_dir(self, session_id: str) -> Path:
        return self.root / session_id

    def exists(self, session_id: str) -> bool:
        return (self.session_dir(session_id) / "events.log").is_file()

    def list_ids(self) -> list[str]:
        return sorted(p.name for p in self.root.iterdir() if (p / "events.log").is_file())

    def blob_store(self, session_id: str) -> BlobStore:
        return BlobStore(self.session_dir(session_id) / "blobs")

    def find_blob(self, content_address: str) -> Path | None:
        for session_id in self.list_ids():
            path = self.blob_store(session_id).find(content_address)
            if path is not None:
                return path
        return None

    # --- events ---------------------------------------------------------------

    def load_records(self, session_id: str) -> list[EventRecord]:
        path = self.session_dir(session_id) / "events.log"
        if not path.is_file():
            raise UnknownSession(f"no stored session {session_id!r}")
        records: list[EventRecord] = []
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise _translate_os_error(exc, f"reading {path}") from None
        for lineno, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                records.append(EventRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                if lineno == len(lines) - 1:
                    break  # torn trailing write of an unacknowledged event
                raise IoError(f"{path}:{lineno + 1}: corrupt event record: {exc}") from None
        return records

    def load(self, session_id: str) -> Session:
        records = self.load_records(session_id)
        session = replay_events(records)
        self._persisted_seq[session_id] = records[-1].seq if records else -1
        return session

    def persist(self, session: Session) -> int:
        """Append unpersisted events and refresh the snapshot.

        Returns the number of appended events; appending nothing is a no-op on
        the log and leaves an existing snapshot untouched.
        """
        directory = self.session_dir(session.id)
        log_path = directory / "events.log"
        snapshot_path = directory / "snapshot.json"

        last = self._persisted_seq.get(session.id)
        if last is None:
            if log_path.is_file():
                stored = self.load_records(session.id)
                last = stored[-1].seq if stored else -1
            else:
                last = -1
        fresh = [rec for rec in session.event_log if rec.seq > last]
        if not fresh and snapshot_path.is_file():
            return 0

        try:
            directory.mkdir(parents=True, exist_ok=True)
            if fresh:
                with open(log_path, "a", encoding="utf-8") as handle:
                    for record in fresh:
                        handle.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
                    handle.flush()
                    os.fsync(handle.fileno())
            tmp = snapshot_path.with_suffix(".json.tmp")
            tmp.write_text(
                json.dumps(session.to_state_dict(), indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
            tmp.replace(snapshot_path)
        except OSError as exc:
            raise _translate_os_error(exc, f"persisting session {session.id}") from None

        if session.event_log:
            self._persisted_seq[session.id] = session.event_log[-1].seq
        return len(fresh)

    # --- tokens ----------------------------------------------------------------

    def save_tokens(self, session_id: str, tokens: dict[str, str]) -> None:
        directory = self.session_dir(session_id)
        try:
            directory.mkdir(parents=True, exist_ok=True)
            tmp = directory / "tokens.json.tmp"
            tmp.write_text(json.dumps(tokens, indent=2), encoding="utf-8")
            tmp.replace(directory / "tokens.json")
        except OSError as exc:
            raise _translate_os_error(exc, f"saving tokens for {session_id}") from None

    def load_tokens(self, session_id: str) -> dict[str, str]:
        path = self.session_dir(session_id) / "tokens.json"
        if not path.is_file():
            return {}
        try:
            return dict(json.loads(path.read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise IoError(f"reading {path}: {exc}") from None
