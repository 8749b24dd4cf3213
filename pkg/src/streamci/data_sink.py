"""Streaming data sink: arrival-windowed partitions and dataset versions.

Records are bucketed by ``floor(timestamp / window_ms)``. Windows close
strictly in order; closing canonicalizes the bucket, persists it in the
object store, and records an immutable Partition. Named, versioned
selections of closed partitions form DatasetVersions.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from pathlib import Path

from . import jsonl
from .core_store import ObjectStore, Record, canonicalize_records, hash_bytes, parse_records, record_to_obj
from .errors import (
    ArgumentError,
    CorruptionError,
    NotFoundError,
    OrderError,
    StateError,
    ValidationError,
)

_STREAM_NAME_RE = re.compile(r"^[A-Za-z0-9._-]+$")


@dataclass(frozen=True)
class Partition:
    """All records whose timestamps fell in one closed arrival window."""

    partition_id: str
    window_start: int
    window_end: int
    record_count: int
    content: str
    tag: str
    stream: str

    @property
    def window_index(self) -> int:
        return int(self.partition_id[1:])

    def to_row(self) -> dict:
        return {
            "partition_id": self.partition_id,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "record_count": self.record_count,
            "content": self.content,
            "tag": self.tag,
            "stream": self.stream,
        }

    @classmethod
    def from_row(cls, row: dict) -> "Partition":
        return cls(
            partition_id=row["partition_id"],
            window_start=row["window_start"],
            window_end=row["window_end"],
            record_count=row["record_count"],
            content=row["content"],
            tag=row["tag"],
            stream=row["stream"],
        )


@dataclass(frozen=True)
class DatasetVersion:
    """An immutable, named, versioned selection of closed partitions."""

    name: str
    version: str
    partitions: tuple[str, ...]
    content: str
    stream: str

    def to_row(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "partitions": list(self.partitions),
            "content": self.content,
            "stream": self.stream,
        }

    @classmethod
    def from_row(cls, row: dict) -> "DatasetVersion":
        return cls(
            name=row["name"],
            version=row["version"],
            partitions=tuple(row["partitions"]),
            content=row["content"],
            stream=row["stream"],
        )


def dataset_content_hash(partition_hashes: list[str]) -> str:
    """Hash over the member partition hashes joined with newlines."""
    return hash_bytes("\n".join(partition_hashes).encode("ascii"))


class DataSink:
    """Collects stream records into partitions and publishes datasets.

    Writes per stream are serialized; readers only ever observe closed
    partitions. All state lives under the home directory, so a fresh
    instance reconstructs everything from disk.
    """

    def __init__(self, home: Path, store: ObjectStore):
        self.home = Path(home)
        self.store = store
        self._lock = threading.RLock()
        self._streams: dict[str, int] = {}
        self._partitions: dict[str, dict[int, Partition]] = {}
        self._datasets: dict[str, dict[str, DatasetVersion]] = {}
        self._pending_ids: dict[tuple[str, int], set[str]] = {}
        self._load()

    # ------------------------------------------------------------------
    # persistence

    @property
    def _streams_path(self) -> Path:
        return self.home / "index" / "streams.jsonl"

    @property
    def _partitions_path(self) -> Path:
        return self.home / "index" / "partitions.jsonl"

    @property
    def _datasets_path(self) -> Path:
        return self.home / "index" / "datasets.jsonl"

    def _pending_path(self, stream: str, window: int) -> Path:
        return self.home / "sink" / stream / f"w{window}.pending.jsonl"

    def _load(self) -> None:
        for row in jsonl.read_rows(self._streams_path):
            self._streams[row["stream"]] = row["window_ms"]
        for row in jsonl.read_rows(self._partitions_path):
            part = Partition.from_row(row)
            self._partitions.setdefault(part.stream, {})[part.window_index] = part
        for row in jsonl.read_rows(self._datasets_path):
            ds = DatasetVersion.from_row(row)
            self._datasets.setdefault(ds.name, {})[ds.version] = ds

    # ------------------------------------------------------------------
    # streams

    def configure_stream(self, stream: str, window_ms: int) -> None:
        """Register a stream with its partition width. Idempotent."""
        if not _STREAM_NAME_RE.match(stream or ""):
            raise ArgumentError(f"invalid stream name {stream!r}")
        if not isinstance(window_ms, int) or isinstance(window_ms, bool) or window_ms <= 0:
            raise ValidationError("window_ms must be a positive integer")
        with self._lock:
            existing = self._streams.get(stream)
            if existing is not None:
                if existing != window_ms:
                    raise StateError(
                        f"stream {stream!r} already configured with window_ms={existing}"
                    )
                return
            jsonl.append_row(self._streams_path, {"stream": stream, "window_ms": window_ms})
            self._streams[stream] = window_ms

    def stream_exists(self, stream: str) -> bool:
        return stream in self._streams

    def stream_names(self) -> list[str]:
        return sorted(self._streams)

    def window_ms(self, stream: str) -> int:
        if stream not in self._streams:
            raise NotFoundError(f"unknown stream {stream!r}")
        return self._streams[stream]

    def _next_window_to_close(self, stream: str) -> int:
        return len(self._partitions.get(stream, {}))

    # ------------------------------------------------------------------
    # ingestion

    def ingest(self, stream: str, records: list[Record]) -> int:
        """Append records to their open window buckets.

        Records whose timestamps fall in an already-closed window are
        rejected, as are duplicate ids within one window. Returns the
        number of accepted records.
        """
        window_ms = self.window_ms(stream)
        with self._lock:
            next_close = self._next_window_to_close(stream)
            accepted: dict[int, list[Record]] = {}
            for record in records:
                record.validated()
                window = record.timestamp // window_ms
                if window < next_close:
                    continue  # late: window already closed
                ids = self._pending_ids_for(stream, window)
                if record.id in ids:
                    continue  # duplicate within the window
                ids.add(record.id)
                accepted.setdefault(window, []).append(record)
            for window, recs in accepted.items():
                path = self._pending_path(stream, window)
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "a", encoding="utf-8") as fh:
                    for r in recs:
                        line = json.dumps(record_to_obj(r), ensure_ascii=False, separators=(",", ":"))
                        fh.write(line + "\n")
            return sum(len(v) for v in accepted.values())

    def _pending_ids_for(self, stream: str, window: int) -> set[str]:
        key = (stream, window)
        if key not in self._pending_ids:
            path = self._pending_path(stream, window)
            ids: set[str] = set()
            if path.exists():
                for record in parse_records(path.read_bytes()):
                    ids.add(record.id)
            self._pending_ids[key] = ids
        return self._pending_ids[key]

    def _pending_records(self, stream: str, window: int) -> list[Record]:
        path = self._pending_path(stream, window)
        if not path.exists():
            return []
        return parse_records(path.read_bytes())

    # ------------------------------------------------------------------
    # windows and partitions

    def close_window(self, stream: str, window_index: int) -> Partition:
        """Seal a window into an immutable, content-hashed partition."""
        window_ms = self.window_ms(stream)
        with self._lock:
            next_close = self._next_window_to_close(stream)
            if window_index < next_close:
                raise StateError(f"window {window_index} of {stream!r} already closed")
            if window_index > next_close:
                raise OrderError(
                    f"cannot close window {window_index} of {stream!r}: "
                    f"window {next_close} must close first"
                )
            records = self._pending_records(stream, window_index)
            payload = canonicalize_records(records)
            digest = self.store.put(payload, "partition")
            partition = Partition(
                partition_id=f"p{window_index}",
                window_start=window_index * window_ms,
                window_end=(window_index + 1) * window_ms,
                record_count=len(records),
                content=digest,
                tag=f"w{window_index}",
                stream=stream,
            )
            jsonl.append_row(self._partitions_path, partition.to_row())
            self._partitions.setdefault(stream, {})[window_index] = partition
            self._pending_ids.pop((stream, window_index), None)
            pending = self._pending_path(stream, window_index)
            if pending.exists():
                pending.unlink()
            return partition

    def list_partitions(self, stream: str, from_window: int, to_window: int) -> list[Partition]:
        """Closed partitions with window index in the inclusive range."""
        if from_window > to_window:
            raise ArgumentError(f"inverted window range [{from_window}, {to_window}]")
        self.window_ms(stream)
        parts = self._partitions.get(stream, {})
        return [parts[w] for w in sorted(parts) if from_window <= w <= to_window]

    def all_partitions(self, stream: str) -> list[Partition]:
        self.window_ms(stream)
        parts = self._partitions.get(stream, {})
        return [parts[w] for w in sorted(parts)]

    def _resolve_partition(self, partition_id: str, stream: str | None) -> Partition:
        matches = []
        for stream_name, parts in self._partitions.items():
            if stream is not None and stream_name != stream:
                continue
            for part in parts.values():
                if part.partition_id == partition_id:
                    matches.append(part)
        if not matches:
            raise NotFoundError(f"unknown partition {partition_id!r}")
        if len(matches) > 1:
            raise ArgumentError(
                f"partition id {partition_id!r} is ambiguous across streams; pass stream="
            )
        return matches[0]

    # ------------------------------------------------------------------
    # datasets

    def publish_dataset(
        self, name: str, partition_ids: list[str], stream: str | None = None
    ) -> DatasetVersion:
        """Freeze a selection of closed partitions as the next dataset version."""
        if not name or not isinstance(name, str):
            raise ArgumentError("dataset name must be a non-empty string")
        if not partition_ids:
            raise ArgumentError("dataset must reference at least one partition")
        if len(set(partition_ids)) != len(partition_ids):
            raise ArgumentError("duplicate partition ids in dataset")
        with self._lock:
            parts = [self._resolve_partition(pid, stream) for pid in partition_ids]
            streams = {p.stream for p in parts}
            if len(streams) > 1:
                raise ArgumentError("dataset partitions must come from a single stream")
            parts.sort(key=lambda p: p.window_start)
            content = dataset_content_hash([p.content for p in parts])
            versions = self._datasets.setdefault(name, {})
            version = f"v{len(versions) + 1}"
            ds = DatasetVersion(
                name=name,
                version=version,
                partitions=tuple(p.partition_id for p in parts),
                content=content,
                stream=parts[0].stream,
            )
            jsonl.append_row(self._datasets_path, ds.to_row())
            versions[version] = ds
            return ds

    def get_dataset(self, name: str, version: str) -> DatasetVersion:
        try:
            return self._datasets[name][version]
        except KeyError:
            raise NotFoundError(f"unknown dataset {name}@{version}") from None

    def list_datasets(self, name: str | None = None) -> list[DatasetVersion]:
        if name is not None:
            if name not in self._datasets:
                raise NotFoundError(f"unknown dataset {name!r}")
            versions = self._datasets[name]
            return [versions[v] for v in sorted(versions, key=lambda s: int(s[1:]))]
        out = []
        for ds_name in sorted(self._datasets):
            out.extend(self.list_datasets(ds_name))
        return out

    def materialize(self, dataset: DatasetVersion) -> list[Record]:
        """Member partitions' records, canonical order within each partition."""
        records: list[Record] = []
        for pid in dataset.partitions:
            part = self._resolve_partition(pid, dataset.stream)
            try:
                payload = self.store.get(part.content, "partition")
            except NotFoundError as exc:
                raise CorruptionError(
                    f"dataset {dataset.name}@{dataset.version}: missing object for {pid}"
                ) from exc
            records.extend(parse_records(payload))
        return records
