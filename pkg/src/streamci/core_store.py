"""Canonical record serialization, content hashing, and the object store.

All persisted payloads flow through here: records are serialized to a
fixed JSON Lines form, hashed with SHA-256, and stored content-addressed
under ``<home>/objects/<kind>/<2hex>/<64hex>``. Identical payloads always
map to identical bytes and identical hashes, across processes and
platforms; everything else in the platform leans on that.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ArgumentError,
    CanonicalizationError,
    CorruptionError,
    NotFoundError,
    StoreError,
    ValidationError,
)

OBJECT_KINDS = ("partition", "manifest", "function", "metrics")

_HASH_RE = re.compile(r"^[0-9a-f]{64}$")


@dataclass(frozen=True)
class Record:
    """One timestamped, optionally labeled text item in a stream."""

    id: str
    timestamp: int
    text: str
    label: str | None = None

    def validated(self) -> "Record":
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("record id must be a non-empty string")
        if isinstance(self.timestamp, bool) or not isinstance(self.timestamp, int):
            raise ValidationError(f"record {self.id!r}: timestamp must be an integer")
        if self.timestamp < 0:
            raise ValidationError(f"record {self.id!r}: timestamp must be >= 0")
        if not isinstance(self.text, str):
            raise ValidationError(f"record {self.id!r}: text must be a string")
        if self.label is not None and not isinstance(self.label, str):
            raise ValidationError(f"record {self.id!r}: label must be a string or absent")
        return self


def record_to_obj(record: Record) -> dict:
    """Dict with the fixed canonical key order (label omitted when absent)."""
    obj = {"id": record.id, "timestamp": record.timestamp, "text": record.text}
    if record.label is not None:
        obj["label"] = record.label
    return obj


def record_from_obj(obj: dict) -> Record:
    try:
        return Record(
            id=obj["id"],
            timestamp=obj["timestamp"],
            text=obj["text"],
            label=obj.get("label"),
        ).validated()
    except KeyError as exc:
        raise ValidationError(f"record object missing field {exc}") from exc


def canonicalize_records(records: list[Record]) -> bytes:
    """Serialize records to the canonical JSON Lines byte form.

    Records are sorted by (timestamp, id); each line is a compact JSON
    object with keys in the order id, timestamp, text, label (label
    omitted when absent), UTF-8 encoded, newline-terminated.

    Raises:
        CanonicalizationError: if two records share an id.
    """
    seen: set[str] = set()
    for record in records:
        if record.id in seen:
            raise CanonicalizationError(f"duplicate record id {record.id!r}")
        seen.add(record.id)
    ordered = sorted(records, key=lambda r: (r.timestamp, r.id))
    lines = [
        json.dumps(record_to_obj(r), ensure_ascii=False, separators=(",", ":"))
        for r in ordered
    ]
    return "".join(line + "\n" for line in lines).encode("utf-8")


def parse_records(data: bytes) -> list[Record]:
    """Inverse of canonicalize_records (order preserved as stored)."""
    records = []
    for line in data.decode("utf-8").splitlines():
        if not line:
            continue
        records.append(record_from_obj(json.loads(line)))
    return records


def hash_bytes(data: bytes) -> str:
    """SHA-256 digest as 64 lowercase hex characters."""
    return hashlib.sha256(data).hexdigest()


def is_content_hash(value: str) -> bool:
    return isinstance(value, str) and bool(_HASH_RE.match(value))


def canonical_json(obj) -> str:
    """Compact JSON with sorted keys; the one canonical object encoding."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class ObjectStore:
    """Append-only content-addressed file store.

    Writes are atomic (temp file + rename) and idempotent, so concurrent
    puts of the same payload are safe. Reads verify the digest.
    """

    def __init__(self, root: Path | str):
        self.root = Path(root)

    def _path(self, digest: str, kind: str) -> Path:
        return self.root / "objects" / kind / digest[:2] / digest

    @staticmethod
    def _check_kind(kind: str) -> None:
        if kind not in OBJECT_KINDS:
            raise ArgumentError(
                f"unknown object kind {kind!r}; expected one of {', '.join(OBJECT_KINDS)}"
            )

    def put(self, payload: bytes, kind: str) -> str:
        """Persist payload, returning its content hash. Re-puts are no-ops."""
        self._check_kind(kind)
        digest = hash_bytes(payload)
        path = self._path(digest, kind)
        if path.exists():
            return digest
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(payload)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        except OSError as exc:
            raise StoreError(f"failed to store object {digest}: {exc}") from exc
        return digest

    def get(self, digest: str, kind: str) -> bytes:
        """Read back exact stored bytes, verifying the digest on the way out."""
        self._check_kind(kind)
        if not is_content_hash(digest):
            raise ArgumentError(f"malformed content hash {digest!r}")
        path = self._path(digest, kind)
        if not path.exists():
            raise NotFoundError(f"object {kind}/{digest} not found")
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise StoreError(f"failed to read object {digest}: {exc}") from exc
        if hash_bytes(data) != digest:
            raise CorruptionError(f"object {kind}/{digest} fails digest verification")
        return data

    def exists(self, digest: str, kind: str) -> bool:
        self._check_kind(kind)
        return self._path(digest, kind).exists()
