"""Pipeline orchestration: planning, cached stage execution, A/B gating.

A run resolves its "$dataset"/"$eval_dataset" bindings to materialized
dataset objects, walks the DAG in deterministic topological order, and
serves each stage from the content-addressed cache when the (function,
params, seed, inputs) key has been computed before. The metrics sink's
output becomes the run's leaderboard entry.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import jsonl
from .core_store import (
    ObjectStore,
    canonical_json,
    canonicalize_records,
    hash_bytes,
    parse_records,
)
from .data_sink import DataSink, DatasetVersion
from .errors import (
    ArgumentError,
    ComparabilityError,
    NotFoundError,
    StreamCIError,
    ValidationError,
)
from .evaluator import BUILTINS
from .leaderboard import DatasetRef, Leaderboard, Run, StageResult
from .registry import FunctionDef, PipelineVersion, Registry, StageNode, toposort


@dataclass(frozen=True)
class RunRequest:
    pipeline_name: str
    pipeline_version: str
    train_dataset: tuple[str, str]
    eval_dataset: tuple[str, str]
    requested_by: str = ""


@dataclass(frozen=True)
class ABDecision:
    champion: tuple[str, str]
    challenger: tuple[str, str]
    metric_name: str
    champion_value: float
    challenger_value: float
    margin: float
    passed: bool

    def to_obj(self) -> dict:
        return {
            "champion": list(self.champion),
            "challenger": list(self.challenger),
            "metric_name": self.metric_name,
            "champion_value": self.champion_value,
            "challenger_value": self.challenger_value,
            "margin": self.margin,
            "passed": self.passed,
        }


class _StageFailure(Exception):
    """Internal: a stage exited nonzero, raised, or produced bad output."""


def plan(pipeline: PipelineVersion) -> list[str]:
    """Deterministic topological execution order (lexicographic tie-break)."""
    return toposort([n.node_id for n in pipeline.nodes], list(pipeline.edges))


def stage_cache_key(node: StageNode, input_hashes: list[str]) -> str:
    """Content-addressed cache key for one stage invocation."""
    obj = {
        "function_name": node.function_name,
        "function_version": node.function_version,
        "params": dict(node.params),
        "seed": node.seed,
        "inputs": list(input_hashes),
    }
    return hash_bytes(canonical_json(obj).encode("utf-8"))


def _now_ms() -> int:
    return int(time.time() * 1000)


class StageCache:
    """Persistent map from stage cache key to (output hash, output kind)."""

    def __init__(self, path: Path):
        self.path = path
        self._entries: dict[str, tuple[str, str]] = {}
        for row in jsonl.read_rows(path):
            self._entries[row["key"]] = (row["output"], row["output_kind"])

    def get(self, key: str) -> tuple[str, str] | None:
        return self._entries.get(key)

    def put(self, key: str, output: str, output_kind: str) -> None:
        if key in self._entries:
            return
        jsonl.append_row(self.path, {"key": key, "output": output, "output_kind": output_kind})
        self._entries[key] = (output, output_kind)


class Orchestrator:
    """Executes pipeline runs against the shared store, sink, and registry."""

    def __init__(
        self,
        store: ObjectStore,
        sink: DataSink,
        registry: Registry,
        leaderboard: Leaderboard,
        home: Path,
    ):
        self.store = store
        self.sink = sink
        self.registry = registry
        self.leaderboard = leaderboard
        self.home = Path(home)
        self.cache = StageCache(self.home / "index" / "stage_cache.jsonl")
        self._ab_lock = threading.Lock()

    # ------------------------------------------------------------------
    # execution

    def _dataset_object_hash(self, dataset: DatasetVersion) -> str:
        """Materialize a dataset into one canonical records object."""
        records = self.sink.materialize(dataset)
        return self.store.put(canonicalize_records(records), "partition")

    def execute(self, request: RunRequest, use_cache: bool = True) -> Run:
        """Run every stage in plan order and record the result.

        Stage failures do not raise; they produce a recorded run with
        status "failed" and the failing node id.
        """
        pipeline = self.registry.get_pipeline(request.pipeline_name, request.pipeline_version)
        train_ds = self.sink.get_dataset(*request.train_dataset)
        eval_ds = self.sink.get_dataset(*request.eval_dataset)
        started = _now_ms()

        token_hashes = {
            "$dataset": self._dataset_object_hash(train_ds),
            "$eval_dataset": self._dataset_object_hash(eval_ds),
        }
        functions = {
            n.node_id: self.registry.get_function(n.function_name, n.function_version)
            for n in pipeline.nodes
        }
        order = plan(pipeline)
        outputs: dict[str, str] = {}
        stage_results: list[StageResult] = []
        failing_node: str | None = None
        log_chunks: list[str] = []

        for node_id in order:
            node = pipeline.node(node_id)
            fn = functions[node_id]
            input_hashes = [
                token_hashes[src] if src in token_hashes else outputs[src]
                for src in pipeline.input_bindings[node_id]
            ]
            key = stage_cache_key(node, input_hashes)
            cached = self.cache.get(key) if use_cache else None
            if cached is not None and self.store.exists(cached[0], self._store_kind(cached[1])):
                output_hash, duration, hit = cached[0], 0, True
            else:
                stage_started = _now_ms()
                try:
                    output_hash = self._invoke(fn, node, input_hashes, log_chunks)
                except _StageFailure as exc:
                    failing_node = node_id
                    log_chunks.append(f"[{node_id}] failed: {exc}")
                    break
                duration = _now_ms() - stage_started
                hit = False
                self.cache.put(key, output_hash, fn.output_kind)
            outputs[node_id] = output_hash
            stage_results.append(
                StageResult(
                    node_id=node_id,
                    output=output_hash,
                    output_kind=fn.output_kind,
                    duration_ms=duration,
                    cache_hit=hit,
                )
            )

        model_name = ""
        hyperparams: dict = {}
        metrics: dict = {}
        if failing_node is None:
            sink_id = next(
                n.node_id for n in pipeline.nodes if functions[n.node_id].output_kind == "metrics"
            )
            try:
                report = json.loads(self.store.get(outputs[sink_id], "metrics"))
                metrics = self._extract_metrics(report)
                model_name = str(report.get("model_name") or functions[sink_id].name)
                hyperparams = dict(report.get("hyperparams") or {})
            except (ValueError, ValidationError) as exc:
                failing_node = sink_id
                metrics = {}
                log_chunks.append(f"[{sink_id}] malformed metrics output: {exc}")

        run = Run(
            run_no=0,
            pipeline_name=pipeline.pipeline_name,
            pipeline_version=pipeline.version,
            manifest_hash=pipeline.manifest_hash,
            train_dataset=DatasetRef(train_ds.name, train_ds.version, train_ds.content),
            eval_dataset=DatasetRef(eval_ds.name, eval_ds.version, eval_ds.content),
            model_name=model_name,
            hyperparams=hyperparams,
            metrics=metrics,
            status="succeeded" if failing_node is None else "failed",
            failing_node=failing_node,
            stage_results=tuple(stage_results),
            requested_by=request.requested_by,
            started_at=started,
            finished_at=_now_ms(),
        )
        run = self.leaderboard.record_run(run)
        if log_chunks:
            log_path = self.home / "logs" / f"run_{run.run_no}.log"
            log_path.parent.mkdir(parents=True, exist_ok=True)
            log_path.write_text("\n".join(log_chunks) + "\n", encoding="utf-8")
        return run

    @staticmethod
    def _store_kind(output_kind: str) -> str:
        return "metrics" if output_kind == "metrics" else "partition"

    @staticmethod
    def _extract_metrics(report) -> dict:
        if not isinstance(report, dict) or not isinstance(report.get("metrics"), dict):
            raise ValidationError('metrics output must be {"metrics": {...}}')
        metrics = {}
        for name, value in report["metrics"].items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"metric {name!r} must be a number")
            metrics[name] = float(value)
        if not metrics:
            raise ValidationError("metrics output names no metrics")
        return metrics

    def _invoke(
        self, fn: FunctionDef, node: StageNode, input_hashes: list[str], log_chunks: list[str]
    ) -> str:
        params = fn.param_defaults()
        params.update(node.params)
        if fn.kind == "builtin":
            payload = self._invoke_builtin(fn, node, params, input_hashes)
        else:
            payload = self._invoke_external(fn, node, params, input_hashes, log_chunks)
        return self.store.put(payload, self._store_kind(fn.output_kind))

    def _invoke_builtin(self, fn, node, params, input_hashes) -> bytes:
        spec = BUILTINS[fn.entry]
        inputs = [parse_records(self.store.get(h, "partition")) for h in input_hashes]
        try:
            result = spec.func(inputs, params, node.seed)
        except StreamCIError as exc:
            raise _StageFailure(str(exc)) from exc
        if fn.output_kind == "metrics":
            return canonical_json(result).encode("utf-8")
        try:
            return canonicalize_records(result)
        except StreamCIError as exc:
            raise _StageFailure(str(exc)) from exc

    def _invoke_external(self, fn, node, params, input_hashes, log_chunks) -> bytes:
        with tempfile.TemporaryDirectory(prefix="streamci-stage-") as tmp:
            tmp_path = Path(tmp)
            env = dict(os.environ)
            for i, digest in enumerate(input_hashes):
                input_path = tmp_path / f"input_{i}.jsonl"
                input_path.write_bytes(self.store.get(digest, "partition"))
                env[f"DATACI_INPUT_{i}"] = str(input_path)
            output_path = tmp_path / "output"
            env["DATACI_OUTPUT"] = str(output_path)
            env["DATACI_PARAMS"] = canonical_json(params)
            env["DATACI_SEED"] = str(node.seed)
            try:
                proc = subprocess.run(
                    fn.entry, shell=True, env=env, capture_output=True, text=True
                )
            except OSError as exc:
                raise _StageFailure(f"could not launch stage command: {exc}") from exc
            if proc.stdout:
                log_chunks.append(f"[{node.node_id}] stdout:\n{proc.stdout}")
            if proc.stderr:
                log_chunks.append(f"[{node.node_id}] stderr:\n{proc.stderr}")
            if proc.returncode != 0:
                raise _StageFailure(f"stage command exited {proc.returncode}")
            if not output_path.exists():
                raise _StageFailure("stage wrote no output file")
            raw = output_path.read_bytes()
        if fn.output_kind == "metrics":
            try:
                report = json.loads(raw)
                self._extract_metrics(report)
            except (ValueError, ValidationError) as exc:
                raise _StageFailure(f"malformed metrics output: {exc}") from exc
            return canonical_json(report).encode("utf-8")
        try:
            return canonicalize_records(parse_records(raw))
        except (ValueError, StreamCIError) as exc:
            raise _StageFailure(f"malformed dataset output: {exc}") from exc

    # ------------------------------------------------------------------
    # A/B gate

    def ab_test(
        self, champion: Run, challenger: Run, metric_name: str, margin: float = 0.0
    ) -> ABDecision:
        """Challenger deploys only if strictly above champion + margin."""
        if not isinstance(margin, (int, float)) or margin < 0:
            raise ArgumentError("margin must be a number >= 0")
        for role, run in (("champion", champion), ("challenger", challenger)):
            if run.status != "succeeded":
                raise ValidationError(f"{role} run #{run.run_no} did not succeed")
            if metric_name not in run.metrics:
                raise NotFoundError(f"{role} run #{run.run_no} lacks metric {metric_name!r}")
        if champion.eval_dataset.content != challenger.eval_dataset.content:
            raise ComparabilityError(
                "champion and challenger were evaluated on different datasets"
            )
        champion_value = champion.metrics[metric_name]
        challenger_value = challenger.metrics[metric_name]
        decision = ABDecision(
            champion=(champion.pipeline_name, champion.pipeline_version),
            challenger=(challenger.pipeline_name, challenger.pipeline_version),
            metric_name=metric_name,
            champion_value=champion_value,
            challenger_value=challenger_value,
            margin=float(margin),
            passed=challenger_value > champion_value + margin,
        )
        with self._ab_lock:
            row = decision.to_obj()
            row.update({"champion_run": champion.run_no, "challenger_run": challenger.run_no})
            jsonl.append_row(self.home / "index" / "abtests.jsonl", row)
        return decision
