"""HTTP JSON service exposing the platform; the contract the playground uses.

Every response is canonical JSON (sorted keys). Domain errors map to
``{"code": ..., "message": ...}`` bodies with 4xx/5xx statuses. The
service keeps no state outside STREAMCI_HOME, so it can be killed and
restarted between any two calls.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import PlainTextResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .errors import (
    ArgumentError,
    CanonicalizationError,
    ComparabilityError,
    CorruptionError,
    DAGError,
    NotFoundError,
    OrderError,
    StateError,
    StoreError,
    StreamCIError,
    ValidationError,
)
from .core_store import canonical_json, record_from_obj
from .orchestrator import RunRequest
from .registry import ParamSpec
from .replay import ScenarioConfig, run_scenario
from .workspace import Workspace

_STATUS = [
    (NotFoundError, 404),
    (DAGError, 422),
    (CanonicalizationError, 422),
    (ValidationError, 422),
    (ArgumentError, 400),
    (OrderError, 409),
    (StateError, 409),
    (ComparabilityError, 409),
    (CorruptionError, 500),
    (StoreError, 500),
]


def _status_for(exc: StreamCIError) -> int:
    for klass, status in _STATUS:
        if isinstance(exc, klass):
            return status
    return 500


def _json_response(obj, status_code: int = 200) -> Response:
    return Response(
        content=canonical_json(obj),
        status_code=status_code,
        media_type="application/json",
    )


def create_app(home: str | Path | None = None) -> FastAPI:
    ws = Workspace(home)
    ws.init()
    app = FastAPI(title="streamci", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[os.environ.get("STREAMCI_CORS_ORIGIN", "*")],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(StreamCIError)
    async def domain_error(request: Request, exc: StreamCIError):
        return _json_response({"code": exc.code, "message": str(exc)}, _status_for(exc))

    @app.exception_handler(StarletteHTTPException)
    async def http_error(request: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "argument"
        return _json_response({"code": code, "message": str(exc.detail)}, exc.status_code)

    # ------------------------------------------------------------------
    # sink

    @app.post("/api/streams")
    async def configure_stream(request: Request):
        body = await _body(request)
        ws.sink.configure_stream(body.get("stream"), body.get("window_ms"))
        return _json_response({"stream": body.get("stream"), "window_ms": body.get("window_ms")})

    @app.post("/api/streams/{stream}/ingest")
    async def ingest(stream: str, request: Request):
        body = await _body(request)
        records = [record_from_obj(obj) for obj in body.get("records", [])]
        accepted = ws.sink.ingest(stream, records)
        return _json_response({"stream": stream, "read": len(records), "accepted": accepted})

    @app.post("/api/streams/{stream}/close")
    async def close_window(stream: str, request: Request):
        body = await _body(request)
        return _json_response(ws.sink.close_window(stream, body.get("window")).to_row())

    @app.get("/api/partitions")
    def list_partitions(
        stream: str | None = None,
        from_window: int = Query(0, alias="from"),
        to_window: int | None = Query(None, alias="to"),
    ):
        stream = _resolve_stream(ws, stream)
        if stream is None:
            return _json_response([])
        if to_window is None:
            parts = [p for p in ws.sink.all_partitions(stream) if p.window_index >= from_window]
        else:
            parts = ws.sink.list_partitions(stream, from_window, to_window)
        return _json_response([p.to_row() for p in parts])

    @app.post("/api/datasets")
    async def publish_dataset(request: Request):
        body = await _body(request)
        ds = ws.sink.publish_dataset(
            name=body.get("name"),
            partition_ids=body.get("partitions", []),
            stream=body.get("stream"),
        )
        return _json_response(ds.to_row())

    @app.get("/api/datasets/{name}")
    def get_datasets(name: str):
        return _json_response([d.to_row() for d in ws.sink.list_datasets(name)])

    # ------------------------------------------------------------------
    # registry

    @app.post("/api/functions")
    async def register_function(request: Request):
        body = await _body(request)
        fn = ws.registry.register_function(
            name=body.get("name"),
            kind=body.get("kind", "builtin"),
            entry=body.get("entry", ""),
            input_arity=body.get("input_arity", 1),
            output_kind=body.get("output_kind", "dataset"),
            param_schema=[
                ParamSpec(p["name"], p["type"], p["default"])
                for p in body.get("param_schema", [])
            ],
        )
        return _json_response(fn.to_row())

    @app.get("/api/functions")
    def list_functions():
        return _json_response([f.to_row() for f in ws.registry.list_functions()])

    @app.post("/api/pipelines")
    async def publish_pipeline(request: Request):
        body = await _body(request)
        pipeline = ws.registry.publish_manifest(body)
        return _json_response(pipeline.to_row())

    @app.get("/api/pipelines")
    def list_pipelines():
        return _json_response([p.to_row() for p in ws.registry.list_pipelines()])

    @app.get("/api/pipelines/{name}")
    def list_pipeline_versions(name: str):
        return _json_response([p.to_row() for p in ws.registry.list_pipelines(name)])

    @app.get("/api/pipelines/{name}/diff")
    def diff_pipelines(name: str, a: str, b: str):
        return _json_response(ws.registry.diff_pipelines(name, a, b))

    @app.get("/api/pipelines/{name}/{version}")
    def get_pipeline(name: str, version: str):
        return _json_response(ws.registry.get_pipeline(name, version).to_row())

    @app.post("/api/pipelines/{name}/{version}/derive")
    async def derive_pipeline(name: str, version: str, request: Request):
        body = await _body(request)
        pipeline = ws.registry.derive_pipeline(
            name=name,
            base_version=version,
            replace=body.get("replace"),
            with_function=(body.get("function"), body.get("function_version")),
            params=body.get("params", {}),
            seed=body.get("seed"),
        )
        return _json_response(pipeline.to_row())

    @app.get("/api/pipelines/{name}/{version}/lineage")
    def get_lineage(name: str, version: str):
        return _json_response(ws.registry.get_lineage(name, version))

    # ------------------------------------------------------------------
    # runs

    @app.post("/api/runs")
    async def execute_run(request: Request):
        body = await _body(request)
        run = ws.orchestrator.execute(
            RunRequest(
                pipeline_name=body.get("pipeline_name"),
                pipeline_version=body.get("pipeline_version"),
                train_dataset=_dataset_ref(body.get("train_dataset")),
                eval_dataset=_dataset_ref(body.get("eval_dataset")),
                requested_by=body.get("requested_by", "api"),
            ),
            use_cache=body.get("use_cache", True),
        )
        return _json_response(run.to_row())

    @app.get("/api/runs")
    def query_runs(
        pipeline_name: str | None = None,
        version: str | None = None,
        eval_dataset_hash: str | None = None,
        status: str | None = None,
        sort: str = "accuracy",
        descending: bool = True,
        limit: int = 50,
    ):
        runs = ws.leaderboard.query_runs(
            pipeline_name=pipeline_name,
            version=version,
            eval_dataset_hash=eval_dataset_hash,
            status=status,
            sort_metric=sort,
            descending=descending,
            limit=limit,
        )
        return _json_response([r.to_row() for r in runs])

    @app.get("/api/runs/{run_no}")
    def get_run(run_no: int):
        return _json_response(ws.leaderboard.get_run(run_no).to_row())

    @app.post("/api/runs/compare")
    async def compare_runs(request: Request):
        body = await _body(request)
        return _json_response(ws.leaderboard.compare_runs(body.get("run_nos", [])))

    @app.post("/api/abtest")
    async def ab_test(request: Request):
        body = await _body(request)
        champion = ws.leaderboard.get_run(body.get("champion_run"))
        challenger = ws.leaderboard.get_run(body.get("challenger_run"))
        decision = ws.orchestrator.ab_test(
            champion,
            challenger,
            metric_name=body.get("metric_name", "accuracy"),
            margin=body.get("margin", 0.0),
        )
        return _json_response(decision.to_obj())

    # ------------------------------------------------------------------
    # scenarios

    @app.post("/api/scenario")
    async def scenario(request: Request):
        body = await _body(request)
        series = run_scenario(ws, ScenarioConfig.from_obj(body))
        return _json_response(series.to_obj())

    @app.get("/api/series/{scenario_id}.csv")
    def get_series(scenario_id: str):
        path = ws.home / "series" / f"{scenario_id}.csv"
        if "/" in scenario_id or not path.exists():
            raise NotFoundError(f"no series for scenario {scenario_id!r}")
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="text/csv")

    return app


async def _body(request: Request) -> dict:
    try:
        body = json.loads(await request.body() or b"{}")
    except ValueError as exc:
        raise ArgumentError(f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ArgumentError("request body must be a JSON object")
    return body


def _dataset_ref(obj) -> tuple[str, str]:
    if not isinstance(obj, dict) or "name" not in obj or "version" not in obj:
        raise ArgumentError('dataset reference must be {"name": ..., "version": ...}')
    return (obj["name"], obj["version"])


def _resolve_stream(ws: Workspace, stream: str | None) -> str | None:
    """Default to the only configured stream; require the param otherwise."""
    if stream is not None:
        ws.sink.window_ms(stream)  # raises NotFoundError for unknown streams
        return stream
    names = ws.sink.stream_names()
    if not names:
        return None
    if len(names) > 1:
        raise ArgumentError("multiple streams configured; pass ?stream=")
    return names[0]


def serve(bind: str, home: str | Path | None = None) -> None:
    """Run the HTTP service until interrupted."""
    import uvicorn

    host, _, port = bind.partition(":")
    uvicorn.run(create_app(home), host=host or "127.0.0.1", port=int(port or 8787))
