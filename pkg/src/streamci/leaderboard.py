"""Run leaderboard: an append-only log of every orchestrated execution.

Runs are indexed by a gap-free monotone run number. The JSONL log under
the home directory is the source of truth; the in-memory index is rebuilt
from it at startup, so the leaderboard survives restarts and crashes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import jsonl
from .errors import ArgumentError, NotFoundError, ValidationError

RUN_STATUSES = ("succeeded", "failed")


@dataclass(frozen=True)
class StageResult:
    """Outcome of one executed (or cache-served) pipeline stage."""

    node_id: str
    output: str
    output_kind: str
    duration_ms: int
    cache_hit: bool

    def to_obj(self) -> dict:
        return {
            "node_id": self.node_id,
            "output": self.output,
            "output_kind": self.output_kind,
            "duration_ms": self.duration_ms,
            "cache_hit": self.cache_hit,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "StageResult":
        return cls(
            node_id=obj["node_id"],
            output=obj["output"],
            output_kind=obj["output_kind"],
            duration_ms=obj["duration_ms"],
            cache_hit=obj["cache_hit"],
        )


@dataclass(frozen=True)
class DatasetRef:
    name: str
    version: str
    content: str

    def to_obj(self) -> dict:
        return {"name": self.name, "version": self.version, "content": self.content}

    @classmethod
    def from_obj(cls, obj: dict) -> "DatasetRef":
        return cls(name=obj["name"], version=obj["version"], content=obj["content"])


@dataclass(frozen=True)
class Run:
    """One orchestrated pipeline execution, as recorded on the leaderboard."""

    run_no: int
    pipeline_name: str
    pipeline_version: str
    manifest_hash: str
    train_dataset: DatasetRef
    eval_dataset: DatasetRef
    model_name: str
    hyperparams: dict
    metrics: dict
    status: str
    failing_node: str | None
    stage_results: tuple[StageResult, ...] = field(default_factory=tuple)
    requested_by: str = ""
    started_at: int = 0
    finished_at: int = 0

    def to_row(self) -> dict:
        return {
            "run_no": self.run_no,
            "pipeline_name": self.pipeline_name,
            "pipeline_version": self.pipeline_version,
            "manifest_hash": self.manifest_hash,
            "train_dataset": self.train_dataset.to_obj(),
            "eval_dataset": self.eval_dataset.to_obj(),
            "model_name": self.model_name,
            "hyperparams": dict(self.hyperparams),
            "metrics": dict(self.metrics),
            "status": self.status,
            "failing_node": self.failing_node,
            "stage_results": [s.to_obj() for s in self.stage_results],
            "requested_by": self.requested_by,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_row(cls, row: dict) -> "Run":
        return cls(
            run_no=row["run_no"],
            pipeline_name=row["pipeline_name"],
            pipeline_version=row["pipeline_version"],
            manifest_hash=row["manifest_hash"],
            train_dataset=DatasetRef.from_obj(row["train_dataset"]),
            eval_dataset=DatasetRef.from_obj(row["eval_dataset"]),
            model_name=row["model_name"],
            hyperparams=row["hyperparams"],
            metrics=row["metrics"],
            status=row["status"],
            failing_node=row["failing_node"],
            stage_results=tuple(StageResult.from_obj(s) for s in row["stage_results"]),
            requested_by=row.get("requested_by", ""),
            started_at=row["started_at"],
            finished_at=row["finished_at"],
        )


class Leaderboard:
    """Gap-free run log with query and comparison support."""

    def __init__(self, home: Path):
        self.home = Path(home)
        self._lock = threading.Lock()
        self._runs: list[Run] = []
        for row in jsonl.read_rows(self.path):
            self._runs.append(Run.from_row(row))

    @property
    def path(self) -> Path:
        return self.home / "runs.jsonl"

    def record_run(self, run: Run) -> Run:
        """Assign the next run number and append. The input run_no is ignored."""
        if run.status not in RUN_STATUSES:
            raise ValidationError(f"run status must be one of {RUN_STATUSES}")
        if run.status == "succeeded":
            if not run.metrics:
                raise ValidationError("a succeeded run must carry metrics")
            if run.failing_node is not None:
                raise ValidationError("a succeeded run cannot name a failing node")
        else:
            if run.metrics:
                raise ValidationError("a failed run cannot carry metrics")
            if not run.failing_node:
                raise ValidationError("a failed run must name its failing node")
        with self._lock:
            numbered = Run(**{**run.__dict__, "run_no": len(self._runs) + 1})
            jsonl.append_row(self.path, numbered.to_row(), sort_keys=True)
            self._runs.append(numbered)
            return numbered

    def get_run(self, run_no: int) -> Run:
        if not isinstance(run_no, int) or run_no < 1 or run_no > len(self._runs):
            raise NotFoundError(f"unknown run {run_no!r}")
        return self._runs[run_no - 1]

    def query_runs(
        self,
        pipeline_name: str | None = None,
        version: str | None = None,
        eval_dataset_hash: str | None = None,
        status: str | None = None,
        sort_metric: str = "accuracy",
        descending: bool = True,
        limit: int = 50,
    ) -> list[Run]:
        """Filter and sort runs; runs lacking the metric sort last."""
        if not isinstance(limit, int) or limit <= 0:
            raise ArgumentError("limit must be a positive integer")
        matches = [
            run
            for run in self._runs
            if (pipeline_name is None or run.pipeline_name == pipeline_name)
            and (version is None or run.pipeline_version == version)
            and (eval_dataset_hash is None or run.eval_dataset.content == eval_dataset_hash)
            and (status is None or run.status == status)
        ]

        def key(run: Run):
            value = run.metrics.get(sort_metric)
            missing = value is None
            rank = 0.0 if missing else (-value if descending else value)
            return (missing, rank, run.run_no)

        return sorted(matches, key=key)[:limit]

    def compare_runs(self, run_nos: list[int]) -> list[dict]:
        """Side-by-side table rows for the given runs, in the given order."""
        if not run_nos:
            raise ArgumentError("compare requires at least one run number")
        rows = []
        for run_no in run_nos:
            run = self.get_run(run_no)
            rows.append(
                {
                    "run_no": run.run_no,
                    "pipeline": f"{run.pipeline_name}@{run.pipeline_version}",
                    "train_dataset": run.train_dataset.to_obj(),
                    "eval_dataset": run.eval_dataset.to_obj(),
                    "model_name": run.model_name,
                    "hyperparams": dict(run.hyperparams),
                    "metrics": dict(run.metrics),
                    "status": run.status,
                }
            )
        return rows

    def __len__(self) -> int:
        return len(self._runs)
