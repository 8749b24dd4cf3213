"""Command-line surface. Prints canonical JSON (CSV for series) to stdout.

Exit codes: 0 success, 1 domain error (error JSON on stderr), 2 usage.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .core_store import canonical_json, record_from_obj
from .errors import ArgumentError, StreamCIError, ValidationError
from .orchestrator import RunRequest
from .registry import ParamSpec
from .replay import export_series, load_scenario_file, run_scenario
from .workspace import Workspace


def _emit(obj) -> None:
    click.echo(canonical_json(obj))


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StreamCIError as exc:
            click.echo(canonical_json({"code": exc.code, "message": str(exc)}), err=True)
            sys.exit(1)

    return wrapper


def _workspace(ctx) -> Workspace:
    return Workspace(ctx.obj)


def _load_json_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _parse_dataset_ref(value: str) -> tuple[str, str]:
    name, sep, version = value.rpartition("@")
    if not sep or not name or not version:
        raise ArgumentError(f"dataset reference {value!r} must look like name@version")
    return name, version


@click.group()
@click.option("--home", envvar="STREAMCI_HOME", default=None, help="Platform home directory.")
@click.pass_context
def main(ctx, home):
    """Continuous integration for data-centric pipelines on streaming data."""
    ctx.obj = home


@main.command()
@click.pass_context
@_handle_errors
def init(ctx):
    """Initialize the home directory and seed the builtin function zoo."""
    ws = _workspace(ctx)
    ws.init()
    _emit({"home": str(ws.home), "functions": [f.name for f in ws.registry.list_functions()]})


@main.command()
@click.option("--stream", "-s", required=True)
@click.option("--file", "-f", "path", required=True, type=click.Path(exists=True))
@click.option("--window-ms", type=int, default=None, help="Configure the stream on first use.")
@click.pass_context
@_handle_errors
def ingest(ctx, stream, path, window_ms):
    """Ingest records from a JSON Lines file into a stream."""
    ws = _workspace(ctx)
    if window_ms is not None:
        ws.sink.configure_stream(stream, window_ms)
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_obj(json.loads(line)))
    accepted = ws.sink.ingest(stream, records)
    _emit({"stream": stream, "read": len(records), "accepted": accepted})


@main.command("close-window")
@click.option("--stream", "-s", required=True)
@click.option("--window", "-w", required=True, type=int)
@click.pass_context
@_handle_errors
def close_window(ctx, stream, window):
    """Close a stream window into an immutable partition."""
    _emit(_workspace(ctx).sink.close_window(stream, window).to_row())


@main.group()
def dataset():
    """Dataset version operations."""


@dataset.command("publish")
@click.argument("name")
@click.option("--partition", "-p", "partitions", multiple=True, required=True)
@click.option("--stream", default=None)
@click.pass_context
@_handle_errors
def dataset_publish(ctx, name, partitions, stream):
    """Publish a dataset version from closed partitions."""
    _emit(_workspace(ctx).sink.publish_dataset(name, list(partitions), stream).to_row())


@main.group()
def function():
    """Function zoo operations."""


@function.command("register")
@click.option("--file", "-f", "path", required=True, type=click.Path(exists=True))
@click.pass_context
@_handle_errors
def function_register(ctx, path):
    """Register a function from a JSON definition file."""
    body = _load_json_file(path)
    fn = _workspace(ctx).registry.register_function(
        name=body.get("name"),
        kind=body.get("kind", "builtin"),
        entry=body.get("entry", ""),
        input_arity=body.get("input_arity", 1),
        output_kind=body.get("output_kind", "dataset"),
        param_schema=[
            ParamSpec(p["name"], p["type"], p["default"]) for p in body.get("param_schema", [])
        ],
    )
    _emit(fn.to_row())


@main.group()
def pipeline():
    """Pipeline registry operations."""


@pipeline.command("publish")
@click.option("--file", "-f", "path", required=True, type=click.Path(exists=True))
@click.pass_context
@_handle_errors
def pipeline_publish(ctx, path):
    """Publish a pipeline version from a manifest file."""
    _emit(_workspace(ctx).registry.publish_manifest(_load_json_file(path)).to_row())


@pipeline.command("derive")
@click.argument("name")
@click.argument("base_version")
@click.option("--replace", required=True, help="Node id to swap.")
@click.option("--function", "function_name", required=True)
@click.option("--function-version", required=True)
@click.option("--params", default="{}", help="JSON object of node params.")
@click.option("--seed", type=int, default=None)
@click.pass_context
@_handle_errors
def pipeline_derive(ctx, name, base_version, replace, function_name, function_version, params, seed):
    """Derive a new version by replacing one node."""
    try:
        params_obj = json.loads(params)
    except ValueError as exc:
        raise ArgumentError(f"--params is not valid JSON: {exc}") from exc
    pv = _workspace(ctx).registry.derive_pipeline(
        name, base_version, replace, (function_name, function_version), params_obj, seed
    )
    _emit(pv.to_row())


@pipeline.command("lineage")
@click.argument("name")
@click.argument("version")
@click.pass_context
@_handle_errors
def pipeline_lineage(ctx, name, version):
    """Print the ancestor chain, self first."""
    _emit(_workspace(ctx).registry.get_lineage(name, version))


@pipeline.command("diff")
@click.argument("name")
@click.argument("a")
@click.argument("b")
@click.pass_context
@_handle_errors
def pipeline_diff(ctx, name, a, b):
    """Print node-level changes between two versions."""
    _emit(_workspace(ctx).registry.diff_pipelines(name, a, b))


@main.command()
@click.option("--pipeline", "-p", "pipeline_name", required=True)
@click.option("--version", "-v", required=True)
@click.option("--train", required=True, help="Train dataset as name@version.")
@click.option("--eval", "eval_", required=True, help="Eval dataset as name@version.")
@click.option("--requested-by", default="cli")
@click.option("--no-cache", is_flag=True, default=False)
@click.pass_context
@_handle_errors
def run(ctx, pipeline_name, version, train, eval_, requested_by, no_cache):
    """Execute a pipeline over the given datasets and record the run."""
    ws = _workspace(ctx)
    result = ws.orchestrator.execute(
        RunRequest(
            pipeline_name=pipeline_name,
            pipeline_version=version,
            train_dataset=_parse_dataset_ref(train),
            eval_dataset=_parse_dataset_ref(eval_),
            requested_by=requested_by,
        ),
        use_cache=not no_cache,
    )
    _emit(result.to_row())


@main.group()
def runs():
    """Leaderboard queries."""


@runs.command("list")
@click.option("--pipeline", "pipeline_name", default=None)
@click.option("--version", default=None)
@click.option("--status", default=None)
@click.option("--sort", default="accuracy")
@click.option("--descending/--ascending", default=True)
@click.option("--limit", type=int, default=50)
@click.pass_context
@_handle_errors
def runs_list(ctx, pipeline_name, version, status, sort, descending, limit):
    """List runs sorted by a metric."""
    result = _workspace(ctx).leaderboard.query_runs(
        pipeline_name=pipeline_name,
        version=version,
        status=status,
        sort_metric=sort,
        descending=descending,
        limit=limit,
    )
    _emit([r.to_row() for r in result])


@runs.command("compare")
@click.argument("run_nos", nargs=-1, type=int)
@click.pass_context
@_handle_errors
def runs_compare(ctx, run_nos):
    """Compare runs side by side."""
    _emit(_workspace(ctx).leaderboard.compare_runs(list(run_nos)))


@main.command()
@click.option("--champion", required=True, type=int, help="Champion run number.")
@click.option("--challenger", required=True, type=int, help="Challenger run number.")
@click.option("--metric", default="accuracy")
@click.option("--margin", type=float, default=0.0)
@click.pass_context
@_handle_errors
def abtest(ctx, champion, challenger, metric, margin):
    """Gate a challenger run against a champion run."""
    ws = _workspace(ctx)
    decision = ws.orchestrator.ab_test(
        ws.leaderboard.get_run(champion), ws.leaderboard.get_run(challenger), metric, margin
    )
    _emit(decision.to_obj())


@main.group()
def scenario():
    """Stream-replay scenarios."""


@scenario.command("run")
@click.option("--file", "-f", "path", required=True, type=click.Path(exists=True))
@click.option("--output", "-o", default=None, help="Also write the series CSV here.")
@click.pass_context
@_handle_errors
def scenario_run(ctx, path, output):
    """Run a scenario config file; prints the quality series."""
    ws = _workspace(ctx)
    ws.init()
    series = run_scenario(ws, load_scenario_file(path))
    if output:
        export_series(series, Path(output))
    _emit(series.to_obj())


@main.command()
@click.option("--bind", default=None, help="host:port, default 127.0.0.1:8787.")
@click.pass_context
@_handle_errors
def serve(ctx, bind):
    """Serve the HTTP API."""
    import os

    from .api import serve as api_serve

    api_serve(bind or os.environ.get("STREAMCI_BIND", "127.0.0.1:8787"), ctx.obj)


if __name__ == "__main__":
    main()
