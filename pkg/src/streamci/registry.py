"""Pipeline registry and function zoo: versioned, append-only, with lineage.

Functions and pipelines get per-name integer versions ("v1", "v2", ...).
Pipeline manifests are validated (acyclic, arity-matched, exactly one
metrics sink), canonicalized, and content-hashed so that equal manifests
are recognizable across versions and names.
"""

from __future__ import annotations

import heapq
import threading
from dataclasses import dataclass
from pathlib import Path

from . import jsonl
from .core_store import ObjectStore, canonical_json
from .errors import DAGError, NotFoundError, ValidationError
from .evaluator import BUILTINS

PARAM_TYPES = ("int", "float", "string", "bool")
FUNCTION_KINDS = ("builtin", "external")
OUTPUT_KINDS = ("dataset", "metrics")
BINDING_TOKENS = ("$dataset", "$eval_dataset")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    type: str
    default: object

    def to_obj(self) -> dict:
        return {"name": self.name, "type": self.type, "default": self.default}


@dataclass(frozen=True)
class FunctionDef:
    """A versioned zoo entry: a builtin identifier or an external command."""

    name: str
    version: str
    kind: str
    entry: str
    input_arity: int
    output_kind: str
    param_schema: tuple[ParamSpec, ...]

    def to_row(self) -> dict:
        return {
            "name": self.name,
            "version": self.version,
            "kind": self.kind,
            "entry": self.entry,
            "input_arity": self.input_arity,
            "output_kind": self.output_kind,
            "param_schema": [p.to_obj() for p in self.param_schema],
        }

    @classmethod
    def from_row(cls, row: dict) -> "FunctionDef":
        return cls(
            name=row["name"],
            version=row["version"],
            kind=row["kind"],
            entry=row["entry"],
            input_arity=row["input_arity"],
            output_kind=row["output_kind"],
            param_schema=tuple(
                ParamSpec(p["name"], p["type"], p["default"]) for p in row["param_schema"]
            ),
        )

    def param_defaults(self) -> dict:
        return {p.name: p.default for p in self.param_schema}


@dataclass(frozen=True)
class StageNode:
    """One DAG node: a function pinned to parameters and a seed."""

    node_id: str
    function_name: str
    function_version: str
    params: dict
    seed: int

    def to_obj(self) -> dict:
        return {
            "id": self.node_id,
            "function": self.function_name,
            "version": self.function_version,
            "params": dict(self.params),
            "seed": self.seed,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "StageNode":
        return cls(
            node_id=obj["id"],
            function_name=obj["function"],
            function_version=obj["version"],
            params=dict(obj.get("params", {})),
            seed=obj.get("seed", 0),
        )


@dataclass(frozen=True)
class PipelineVersion:
    pipeline_name: str
    version: str
    parent_version: str | None
    nodes: tuple[StageNode, ...]
    edges: tuple[tuple[str, str], ...]
    input_bindings: dict[str, tuple[str, ...]]
    manifest_hash: str

    def node(self, node_id: str) -> StageNode:
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise NotFoundError(f"no node {node_id!r} in {self.pipeline_name}@{self.version}")

    def manifest_obj(self) -> dict:
        return {
            "nodes": [n.to_obj() for n in sorted(self.nodes, key=lambda n: n.node_id)],
            "edges": sorted([list(e) for e in self.edges]),
            "bindings": {k: list(v) for k, v in sorted(self.input_bindings.items())},
        }

    def to_row(self) -> dict:
        row = {"name": self.pipeline_name, "version": self.version, "parent": self.parent_version}
        row.update(self.manifest_obj())
        row["manifest_hash"] = self.manifest_hash
        return row

    @classmethod
    def from_row(cls, row: dict) -> "PipelineVersion":
        return cls(
            pipeline_name=row["name"],
            version=row["version"],
            parent_version=row["parent"],
            nodes=tuple(StageNode.from_obj(n) for n in row["nodes"]),
            edges=tuple((e[0], e[1]) for e in row["edges"]),
            input_bindings={k: tuple(v) for k, v in row["bindings"].items()},
            manifest_hash=row["manifest_hash"],
        )


def canonical_manifest_bytes(
    nodes: list[StageNode], edges: list[tuple[str, str]], bindings: dict[str, list[str]]
) -> bytes:
    """The byte form that defines manifest identity (and gets hashed)."""
    obj = {
        "bindings": {k: list(v) for k, v in sorted(bindings.items())},
        "edges": sorted([list(e) for e in edges]),
        "nodes": [n.to_obj() for n in sorted(nodes, key=lambda n: n.node_id)],
    }
    return canonical_json(obj).encode("utf-8")


def toposort(node_ids: list[str], edges: list[tuple[str, str]]) -> list[str]:
    """Topological order with lexicographic tie-break; DAGError on a cycle."""
    indegree = {n: 0 for n in node_ids}
    outgoing: dict[str, list[str]] = {n: [] for n in node_ids}
    for u, v in edges:
        outgoing[u].append(v)
        indegree[v] += 1
    ready = [n for n in node_ids if indegree[n] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        node = heapq.heappop(ready)
        order.append(node)
        for succ in outgoing[node]:
            indegree[succ] -= 1
            if indegree[succ] == 0:
                heapq.heappush(ready, succ)
    if len(order) != len(node_ids):
        raise DAGError("pipeline edge graph contains a cycle")
    return order


def _check_param_value(spec: ParamSpec, value) -> None:
    expected = spec.type
    ok = (
        (expected == "int" and isinstance(value, int) and not isinstance(value, bool))
        or (expected == "float" and isinstance(value, (int, float)) and not isinstance(value, bool))
        or (expected == "string" and isinstance(value, str))
        or (expected == "bool" and isinstance(value, bool))
    )
    if not ok:
        raise ValidationError(
            f"param {spec.name!r} expects {expected}, got {value!r}"
        )


class Registry:
    """Append-only store of function and pipeline versions."""

    def __init__(self, home: Path, store: ObjectStore):
        self.home = Path(home)
        self.store = store
        self._lock = threading.RLock()
        self._functions: dict[str, dict[str, FunctionDef]] = {}
        self._pipelines: dict[str, dict[str, PipelineVersion]] = {}
        self._load()

    @property
    def _functions_path(self) -> Path:
        return self.home / "index" / "functions.jsonl"

    @property
    def _pipelines_path(self) -> Path:
        return self.home / "index" / "pipelines.jsonl"

    def _load(self) -> None:
        for row in jsonl.read_rows(self._functions_path):
            fn = FunctionDef.from_row(row)
            self._functions.setdefault(fn.name, {})[fn.version] = fn
        for row in jsonl.read_rows(self._pipelines_path):
            p = PipelineVersion.from_row(row)
            self._pipelines.setdefault(p.pipeline_name, {})[p.version] = p

    # ------------------------------------------------------------------
    # functions

    def register_function(
        self,
        name: str,
        kind: str,
        entry: str,
        input_arity: int,
        output_kind: str,
        param_schema: list[ParamSpec] | None = None,
    ) -> FunctionDef:
        """Register the next version of a named function."""
        param_schema = tuple(param_schema or ())
        if not name or not isinstance(name, str):
            raise ValidationError("function name must be a non-empty string")
        if kind not in FUNCTION_KINDS:
            raise ValidationError(f"function kind must be one of {FUNCTION_KINDS}")
        if output_kind not in OUTPUT_KINDS:
            raise ValidationError(f"output_kind must be one of {OUTPUT_KINDS}")
        if not isinstance(input_arity, int) or isinstance(input_arity, bool) or input_arity < 1:
            raise ValidationError("input_arity must be an integer >= 1")
        seen = set()
        for spec in param_schema:
            if spec.type not in PARAM_TYPES:
                raise ValidationError(f"param {spec.name!r}: unknown type {spec.type!r}")
            if spec.name in seen:
                raise ValidationError(f"duplicate param name {spec.name!r}")
            seen.add(spec.name)
            _check_param_value(spec, spec.default)
        if kind == "builtin":
            builtin = BUILTINS.get(entry)
            if builtin is None:
                raise ValidationError(f"unknown builtin entry {entry!r}")
            if builtin.input_arity != input_arity or builtin.output_kind != output_kind:
                raise ValidationError(
                    f"builtin {entry!r} has arity {builtin.input_arity} and "
                    f"output kind {builtin.output_kind!r}"
                )
        with self._lock:
            versions = self._functions.setdefault(name, {})
            fn = FunctionDef(
                name=name,
                version=f"v{len(versions) + 1}",
                kind=kind,
                entry=entry,
                input_arity=input_arity,
                output_kind=output_kind,
                param_schema=param_schema,
            )
            self.store.put(canonical_json(fn.to_row()).encode("utf-8"), "function")
            jsonl.append_row(self._functions_path, fn.to_row())
            versions[fn.version] = fn
            return fn

    def get_function(self, name: str, version: str) -> FunctionDef:
        try:
            return self._functions[name][version]
        except KeyError:
            raise NotFoundError(f"unknown function {name}@{version}") from None

    def list_functions(self) -> list[FunctionDef]:
        out = []
        for name in sorted(self._functions):
            versions = self._functions[name]
            out.extend(versions[v] for v in sorted(versions, key=lambda s: int(s[1:])))
        return out

    def function_exists(self, name: str) -> bool:
        return name in self._functions

    # ------------------------------------------------------------------
    # pipelines

    def _validate_manifest(
        self, nodes: list[StageNode], edges: list[tuple[str, str]], bindings: dict
    ) -> None:
        if not nodes:
            raise ValidationError("pipeline must contain at least one node")
        ids = [n.node_id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate node ids in manifest")
        if any(not i or not isinstance(i, str) for i in ids):
            raise ValidationError("node ids must be non-empty strings")
        id_set = set(ids)

        functions = {}
        for node in nodes:
            fn = self.get_function(node.function_name, node.function_version)
            functions[node.node_id] = fn
            specs = {p.name: p for p in fn.param_schema}
            for key, value in node.params.items():
                if key not in specs:
                    raise ValidationError(
                        f"node {node.node_id!r}: unknown param {key!r} for {fn.name}"
                    )
                _check_param_value(specs[key], value)
            if not isinstance(node.seed, int) or isinstance(node.seed, bool):
                raise ValidationError(f"node {node.node_id!r}: seed must be an integer")

        for edge in edges:
            if len(edge) != 2 or edge[0] not in id_set or edge[1] not in id_set:
                raise ValidationError(f"edge {edge!r} references unknown node")
        if len(set(edges)) != len(edges):
            raise ValidationError("duplicate edges in manifest")

        if set(bindings) != id_set:
            raise ValidationError("bindings must cover exactly the manifest's nodes")
        derived_edges = set()
        for node_id, sources in bindings.items():
            arity = functions[node_id].input_arity
            if len(sources) != arity:
                raise ValidationError(
                    f"node {node_id!r} binds {len(sources)} inputs, "
                    f"function {functions[node_id].name} expects {arity}"
                )
            for source in sources:
                if source in BINDING_TOKENS:
                    continue
                if source not in id_set:
                    raise ValidationError(
                        f"node {node_id!r}: binding source {source!r} is neither "
                        f"a node nor one of {BINDING_TOKENS}"
                    )
                if source == node_id:
                    raise ValidationError(f"node {node_id!r} cannot consume itself")
                if functions[source].output_kind != "dataset":
                    raise ValidationError(
                        f"node {node_id!r} consumes non-dataset output of {source!r}"
                    )
                derived_edges.add((source, node_id))
        if derived_edges != set(edges):
            raise ValidationError("edges and input bindings disagree")

        sinks = [n for n in nodes if functions[n.node_id].output_kind == "metrics"]
        if len(sinks) != 1:
            raise ValidationError(
                f"pipeline must have exactly one metrics sink, found {len(sinks)}"
            )
        sink_id = sinks[0].node_id
        if any(u == sink_id for u, _ in edges):
            raise ValidationError("the metrics sink cannot have outgoing edges")

        toposort(ids, list(edges))  # raises DAGError on a cycle

    def publish_pipeline(
        self,
        name: str,
        nodes: list[StageNode],
        edges: list[tuple[str, str]],
        bindings: dict[str, list[str]],
        parent: str | None = None,
    ) -> PipelineVersion:
        """Validate a manifest and record it as the next pipeline version."""
        if not name or not isinstance(name, str):
            raise ValidationError("pipeline name must be a non-empty string")
        self._validate_manifest(nodes, edges, bindings)
        with self._lock:
            versions = self._pipelines.setdefault(name, {})
            if parent is not None and parent not in versions:
                raise NotFoundError(f"parent version {parent!r} of {name!r} does not exist")
            manifest = canonical_manifest_bytes(nodes, edges, bindings)
            manifest_hash = self.store.put(manifest, "manifest")
            # normalize to canonical order so reloads compare equal
            pipeline = PipelineVersion(
                pipeline_name=name,
                version=f"v{len(versions) + 1}",
                parent_version=parent,
                nodes=tuple(sorted(nodes, key=lambda n: n.node_id)),
                edges=tuple(sorted(edges)),
                input_bindings={k: tuple(v) for k, v in sorted(bindings.items())},
                manifest_hash=manifest_hash,
            )
            jsonl.append_row(self._pipelines_path, pipeline.to_row())
            versions[pipeline.version] = pipeline
            return pipeline

    def publish_manifest(self, manifest: dict) -> PipelineVersion:
        """Publish from the external manifest file format."""
        try:
            nodes = [StageNode.from_obj(n) for n in manifest["nodes"]]
            edges = [(e[0], e[1]) for e in manifest["edges"]]
            bindings = {k: list(v) for k, v in manifest["bindings"].items()}
            name = manifest["name"]
        except (KeyError, TypeError, IndexError) as exc:
            raise ValidationError(f"malformed manifest: {exc}") from exc
        return self.publish_pipeline(name, nodes, edges, bindings, manifest.get("parent"))

    def get_pipeline(self, name: str, version: str) -> PipelineVersion:
        try:
            return self._pipelines[name][version]
        except KeyError:
            raise NotFoundError(f"unknown pipeline {name}@{version}") from None

    def list_pipelines(self, name: str | None = None) -> list[PipelineVersion]:
        if name is not None:
            if name not in self._pipelines:
                raise NotFoundError(f"unknown pipeline {name!r}")
            versions = self._pipelines[name]
            return [versions[v] for v in sorted(versions, key=lambda s: int(s[1:]))]
        out = []
        for pname in sorted(self._pipelines):
            out.extend(self.list_pipelines(pname))
        return out

    def derive_pipeline(
        self,
        name: str,
        base_version: str,
        replace: str,
        with_function: tuple[str, str],
        params: dict,
        seed: int | None = None,
    ) -> PipelineVersion:
        """Publish a child version equal to the base except for one node."""
        base = self.get_pipeline(name, base_version)
        old_node = base.node(replace)
        old_fn = self.get_function(old_node.function_name, old_node.function_version)
        new_fn = self.get_function(*with_function)
        if new_fn.input_arity != old_fn.input_arity or new_fn.output_kind != old_fn.output_kind:
            raise ValidationError(
                f"replacement {new_fn.name}@{new_fn.version} must match arity "
                f"{old_fn.input_arity} and output kind {old_fn.output_kind!r}"
            )
        new_node = StageNode(
            node_id=replace,
            function_name=new_fn.name,
            function_version=new_fn.version,
            params=dict(params),
            seed=old_node.seed if seed is None else seed,
        )
        nodes = [new_node if n.node_id == replace else n for n in base.nodes]
        return self.publish_pipeline(
            name,
            nodes,
            list(base.edges),
            {k: list(v) for k, v in base.input_bindings.items()},
            parent=base_version,
        )

    def get_lineage(self, name: str, version: str) -> list[str]:
        """Ancestor chain, self first, root last."""
        chain = []
        current: str | None = version
        while current is not None:
            pipeline = self.get_pipeline(name, current)
            chain.append(current)
            current = pipeline.parent_version
        return chain

    def lineage_graph(self, name: str) -> list[tuple[str, str]]:
        """All (child, parent) lineage edges of one pipeline name."""
        if name not in self._pipelines:
            raise NotFoundError(f"unknown pipeline {name!r}")
        edges = []
        versions = self._pipelines[name]
        for version in sorted(versions, key=lambda s: int(s[1:])):
            parent = versions[version].parent_version
            if parent is not None:
                edges.append((version, parent))
        return edges

    def diff_pipelines(self, name: str, a: str, b: str) -> list[dict]:
        """Node-level changes from version a to version b."""
        pa = self.get_pipeline(name, a)
        pb = self.get_pipeline(name, b)
        nodes_a = {n.node_id: n for n in pa.nodes}
        nodes_b = {n.node_id: n for n in pb.nodes}
        changes = []
        for node_id in sorted(set(nodes_a) | set(nodes_b)):
            if node_id not in nodes_b:
                changes.append({"node_id": node_id, "change": "removed"})
            elif node_id not in nodes_a:
                changes.append({"node_id": node_id, "change": "added"})
            else:
                same_node = nodes_a[node_id].to_obj() == nodes_b[node_id].to_obj()
                same_bindings = pa.input_bindings.get(node_id) == pb.input_bindings.get(node_id)
                if not (same_node and same_bindings):
                    changes.append({"node_id": node_id, "change": "modified"})
        return changes
