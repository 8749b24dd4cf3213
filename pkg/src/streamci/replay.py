"""Stream replay harness: drift corpus generation and scheduled upgrades.

Generates a synthetic two-class text corpus whose class-signature tokens
gradually swap over time (label-flip drift), replays it window by window
into the sink, trains and evaluates pipeline versions per an upgrade
schedule with A/B gating, and assembles the quality-versus-time series
that shows why a frozen pipeline decays while refreshed ones hold up.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .core_store import Record, canonical_json, hash_bytes
from .errors import ArgumentError, NotFoundError, StoreError, ValidationError
from .orchestrator import RunRequest
from .registry import ParamSpec
from .prng import (
    GOLDEN_GAMMA,
    MASK64,
    MIX_MUL_1,
    MIX_MUL_2,
    prng_next,
    record_scoped_state,
    unit_float,
)
from .workspace import Workspace

SIGNATURE_TOKENS = {
    "0": ("s0", "s1", "s2", "s3", "s4"),
    "1": ("s5", "s6", "s7", "s8", "s9"),
}
_CLASS_MIX = {"0": 1, "1": 2}
TRAIN_POLICIES = ("latest_window", "cumulative")
METRIC_NAME = "accuracy"


@dataclass(frozen=True)
class DriftCorpusConfig:
    n_windows: int = 8
    docs_per_class_per_window: int = 300
    window_ms: int = 1000
    seed: int = 0
    background_vocab_size: int = 50
    tokens_background_per_doc: int = 15
    tokens_signature_per_doc: int = 5

    def validated(self) -> "DriftCorpusConfig":
        if self.n_windows < 2:
            raise ValidationError("corpus needs at least 2 windows")
        for name in (
            "docs_per_class_per_window",
            "window_ms",
            "background_vocab_size",
            "tokens_background_per_doc",
            "tokens_signature_per_doc",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        return self

    def to_obj(self) -> dict:
        return {
            "n_windows": self.n_windows,
            "docs_per_class_per_window": self.docs_per_class_per_window,
            "window_ms": self.window_ms,
            "seed": self.seed,
            "background_vocab_size": self.background_vocab_size,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "DriftCorpusConfig":
        return cls(
            n_windows=obj.get("n_windows", 8),
            docs_per_class_per_window=obj.get("docs_per_class_per_window", 300),
            window_ms=obj.get("window_ms", 1000),
            seed=obj.get("seed", 0),
            background_vocab_size=obj.get("background_vocab_size", 50),
        ).validated()


@dataclass(frozen=True)
class ScheduleEntry:
    window: int
    action: str
    pipeline: str
    version: str

    def to_obj(self) -> dict:
        return {
            "window": self.window,
            "action": self.action,
            "pipeline": self.pipeline,
            "version": self.version,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    corpus: DriftCorpusConfig
    schedule: tuple[ScheduleEntry, ...]
    train_policy: str = "latest_window"
    holdout_fraction: float = 0.2
    ab_margin: float = 0.0
    setup: dict | None = None

    def to_obj(self) -> dict:
        obj = {
            "corpus": self.corpus.to_obj(),
            "schedule": [e.to_obj() for e in self.schedule],
            "train_policy": self.train_policy,
            "holdout_fraction": self.holdout_fraction,
            "ab_margin": self.ab_margin,
        }
        if self.setup is not None:
            obj["setup"] = self.setup
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "ScenarioConfig":
        try:
            corpus = DriftCorpusConfig.from_obj(obj["corpus"])
            schedule = tuple(
                ScheduleEntry(e["window"], e["action"], e["pipeline"], e["version"])
                for e in obj["schedule"]
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scenario config: {exc}") from exc
        return cls(
            corpus=corpus,
            schedule=schedule,
            train_policy=obj.get("train_policy", "latest_window"),
            holdout_fraction=obj.get("holdout_fraction", 0.2),
            ab_margin=obj.get("ab_margin", 0.0),
            setup=obj.get("setup"),
        ).validated()

    def validated(self) -> "ScenarioConfig":
        self.corpus.validated()
        if self.train_policy not in TRAIN_POLICIES:
            raise ValidationError(f"train_policy must be one of {TRAIN_POLICIES}")
        if not 0 < self.holdout_fraction < 1:
            raise ValidationError("holdout_fraction must be in (0, 1)")
        if self.ab_margin < 0:
            raise ValidationError("ab_margin must be >= 0")
        initial = [e for e in self.schedule if e.action == "deploy_initial"]
        if len(initial) != 1 or initial[0].window != 0:
            raise ValidationError("schedule needs exactly one deploy_initial, at window 0")
        last_round = self.corpus.n_windows - 2
        for entry in self.schedule:
            if entry.action == "propose":
                if not 1 <= entry.window <= last_round:
                    raise ValidationError(
                        f"proposal at window {entry.window} cannot be evaluated "
                        f"(valid range is 1..{last_round})"
                    )
            elif entry.action != "deploy_initial":
                raise ValidationError(f"unknown schedule action {entry.action!r}")
        names = {e.pipeline for e in self.schedule}
        if len(names) != 1:
            raise ValidationError("a scenario drives exactly one pipeline name")
        return self


@dataclass
class QualitySeries:
    """Per-version metric series plus the deployed-version timeline."""

    scenario_id: str
    pipeline_name: str
    metric_name: str
    series: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    timeline: list[tuple[int, str]] = field(default_factory=list)
    gates: list[dict] = field(default_factory=list)
    run_nos: list[int] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "pipeline_name": self.pipeline_name,
            "metric_name": self.metric_name,
            "series": {v: [[w, x] for w, x in pts] for v, pts in self.series.items()},
            "timeline": [[w, v] for w, v in self.timeline],
            "gates": list(self.gates),
            "run_nos": list(self.run_nos),
        }


# ----------------------------------------------------------------------
# corpus generation


def gen_corpus(config: DriftCorpusConfig) -> list[Record]:
    """Generate the drifting corpus, fully determined by the config.

    At window t, a signature slot stays faithful to its class with
    probability 1 - t/(T-1); by the last window every signature token
    comes from the opposite class's set.
    """
    config.validated()
    records = []
    total = config.n_windows
    for t in range(total):
        flip_rate = t / (total - 1)
        for label in ("0", "1"):
            own = SIGNATURE_TOKENS[label]
            other = SIGNATURE_TOKENS["1" if label == "0" else "0"]
            for j in range(config.docs_per_class_per_window):
                state = (
                    config.seed
                    ^ ((t * GOLDEN_GAMMA) & MASK64)
                    ^ ((_CLASS_MIX[label] * MIX_MUL_1) & MASK64)
                    ^ ((j * MIX_MUL_2) & MASK64)
                ) & MASK64
                tokens = []
                for _ in range(config.tokens_background_per_doc):
                    value, state = prng_next(state)
                    tokens.append(f"bg_{value % config.background_vocab_size}")
                for _ in range(config.tokens_signature_per_doc):
                    value, state = prng_next(state)
                    source = own if unit_float(value) >= flip_rate else other
                    value, state = prng_next(state)
                    tokens.append(source[value % len(source)])
                records.append(
                    Record(
                        id=f"d_{t}_{label}_{j}",
                        timestamp=t * config.window_ms + j,
                        text=" ".join(tokens),
                        label=label,
                    )
                )
    return records


def in_holdout(corpus_seed: int, record_id: str, holdout_fraction: float) -> bool:
    """Deterministic per-record holdout membership."""
    value, _ = prng_next(record_scoped_state(corpus_seed, record_id))
    return unit_float(value) < holdout_fraction


# ----------------------------------------------------------------------
# scenario execution


def _scenario_id(ws: Workspace, config: ScenarioConfig) -> str:
    base = "scn-" + hash_bytes(canonical_json(config.to_obj()).encode("utf-8"))[:12]
    candidate = base
    suffix = 2
    while ws.sink.stream_exists(candidate):
        candidate = f"{base}-{suffix}"
        suffix += 1
    return candidate


def apply_setup(ws: Workspace, setup: dict | None) -> None:
    """Create the functions and pipelines a canned scenario relies on.

    A pipeline name that already has versions is assumed set up and its
    operations are skipped, so replaying a scenario config in the same
    home does not re-publish.
    """
    if not setup:
        return
    ws.seed_builtin_functions()
    for fn in setup.get("functions", []):
        if not ws.registry.function_exists(fn["name"]):
            ws.registry.register_function(
                name=fn["name"],
                kind=fn["kind"],
                entry=fn["entry"],
                input_arity=fn["input_arity"],
                output_kind=fn["output_kind"],
                param_schema=[
                    ParamSpec(p["name"], p["type"], p["default"])
                    for p in fn.get("param_schema", [])
                ],
            )
    preexisting: dict[str, bool] = {}

    def skip(name: str) -> bool:
        if name not in preexisting:
            preexisting[name] = _pipeline_name_exists(ws, name)
        return preexisting[name]

    for op in setup.get("pipelines", []):
        if "publish" in op:
            if not skip(op["publish"]["name"]):
                ws.registry.publish_manifest(op["publish"])
        elif "derive" in op:
            spec = op["derive"]
            if not skip(spec["name"]):
                ws.registry.derive_pipeline(
                    name=spec["name"],
                    base_version=spec["base"],
                    replace=spec["replace"],
                    with_function=(spec["function"], spec["function_version"]),
                    params=spec.get("params", {}),
                    seed=spec.get("seed"),
                )
        else:
            raise ValidationError(f"unknown setup pipeline operation {op!r}")


def _pipeline_name_exists(ws: Workspace, name: str) -> bool:
    try:
        ws.registry.list_pipelines(name)
        return True
    except NotFoundError:
        return False


def run_scenario(ws: Workspace, config: ScenarioConfig) -> QualitySeries:
    """Replay the corpus window by window, driving runs and gated upgrades.

    Each window's records are split into a training part and a holdout
    part; pipelines trained on data up to window t are evaluated on the
    holdout of window t+1, so every score is "online": measured on data
    that arrived after the training data.
    """
    config = config.validated()
    apply_setup(ws, config.setup)
    pipeline_name = config.schedule[0].pipeline
    for entry in config.schedule:
        ws.registry.get_pipeline(entry.pipeline, entry.version)

    corpus = gen_corpus(config.corpus)
    by_window: dict[int, list[Record]] = {}
    for record in corpus:
        by_window.setdefault(record.timestamp // config.corpus.window_ms, []).append(record)

    scenario_id = _scenario_id(ws, config)
    main_stream = scenario_id
    holdout_stream = scenario_id + ".holdout"
    ws.sink.configure_stream(main_stream, config.corpus.window_ms)
    ws.sink.configure_stream(holdout_stream, config.corpus.window_ms)
    train_name = scenario_id + "-train"
    eval_name = scenario_id + "-eval"

    proposals: dict[int, list[ScheduleEntry]] = {}
    for entry in config.schedule:
        if entry.action == "propose":
            proposals.setdefault(entry.window, []).append(entry)

    result = QualitySeries(
        scenario_id=scenario_id, pipeline_name=pipeline_name, metric_name=METRIC_NAME
    )
    points: dict[str, dict[int, float]] = {}

    def publish_train(window: int):
        if config.train_policy == "latest_window":
            ids = [f"p{window}"]
        else:
            ids = [f"p{w}" for w in range(window + 1)]
        return ws.sink.publish_dataset(train_name, ids, stream=main_stream)

    def run_one(version: str, train_ds, eval_ds, who: str):
        run = ws.orchestrator.execute(
            RunRequest(
                pipeline_name=pipeline_name,
                pipeline_version=version,
                train_dataset=(train_ds.name, train_ds.version),
                eval_dataset=(eval_ds.name, eval_ds.version),
                requested_by=who,
            )
        )
        result.run_nos.append(run.run_no)
        return run

    initial_version = config.schedule[0].version
    initial_train = None
    deployed_version = initial_version
    deployed_train = None

    total = config.corpus.n_windows
    for t in range(total):
        train_part, holdout_part = [], []
        for record in by_window.get(t, []):
            if in_holdout(config.corpus.seed, record.id, config.holdout_fraction):
                holdout_part.append(record)
            else:
                train_part.append(record)
        ws.sink.ingest(main_stream, train_part)
        ws.sink.ingest(holdout_stream, holdout_part)
        ws.sink.close_window(main_stream, t)
        ws.sink.close_window(holdout_stream, t)

        if t == 0:
            initial_train = deployed_train = publish_train(0)
            result.timeline.append((0, initial_version))
            continue

        eval_ds = ws.sink.publish_dataset(eval_name, [f"p{t}"], stream=holdout_stream)

        frozen_run = run_one(initial_version, initial_train, eval_ds, "scenario:frozen")
        points.setdefault(initial_version, {})[t] = frozen_run.metrics[METRIC_NAME]
        champion_run = frozen_run
        if deployed_version != initial_version or deployed_train is not initial_train:
            champion_run = run_one(deployed_version, deployed_train, eval_ds, "scenario:champion")
            points.setdefault(deployed_version, {})[t] = champion_run.metrics[METRIC_NAME]

        round_train = None
        for entry in proposals.get(t - 1, []):
            if round_train is None:
                round_train = publish_train(t - 1)
            challenger_run = run_one(entry.version, round_train, eval_ds, "scenario:challenger")
            points.setdefault(entry.version, {})[t] = challenger_run.metrics[METRIC_NAME]
            decision = ws.orchestrator.ab_test(
                champion_run, challenger_run, METRIC_NAME, config.ab_margin
            )
            result.gates.append(
                {
                    "window": t,
                    "champion": list(decision.champion),
                    "challenger": list(decision.challenger),
                    "champion_value": decision.champion_value,
                    "challenger_value": decision.challenger_value,
                    "passed": decision.passed,
                }
            )
            if decision.passed:
                deployed_version = entry.version
                deployed_train = round_train
                champion_run = challenger_run
        result.timeline.append((t, deployed_version))

    for version, by_w in points.items():
        result.series[version] = sorted(by_w.items())
    export_series(result, ws.home / "series" / f"{scenario_id}.csv")
    return result


def export_series(series: QualitySeries, path: Path | str) -> None:
    """Write the series as CSV: window,pipeline_version,metric_name,value."""
    if not series.series:
        raise ArgumentError("cannot export an empty series")
    rows = []
    for version, pts in series.series.items():
        for window, value in pts:
            rows.append((window, int(version[1:]), version, value))
    rows.sort()
    lines = ["window,pipeline_version,metric_name,value"]
    for window, _, version, value in rows:
        lines.append(f"{window},{version},{series.metric_name},{value!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StoreError(f"failed to write series CSV to {path}: {exc}") from exc


# ----------------------------------------------------------------------
# canned scenarios


def _demo_manifest(name: str, keep_fraction: float) -> dict:
    return {
        "name": name,
        "nodes": [
            {
                "id": "select",
                "function": "select_recent",
                "version": "v1",
                "params": {"keep_fraction": keep_fraction},
                "seed": 0,
            },
            {
                "id": "evaluate",
                "function": "train_eval_nb",
                "version": "v1",
                "params": {"alpha": 1.0},
                "seed": 0,
            },
        ],
        "edges": [["select", "evaluate"]],
        "bindings": {"select": ["$dataset"], "evaluate": ["select", "$eval_dataset"]},
    }


def _derive_op(name: str, base: str, keep_fraction: float) -> dict:
    return {
        "derive": {
            "name": name,
            "base": base,
            "replace": "select",
            "function": "select_recent",
            "function_version": "v1",
            "params": {"keep_fraction": keep_fraction},
        }
    }


def default_drift_scenario() -> dict:
    """The drift demonstration: a frozen line versus per-window refreshes.

    One pipeline is deployed at window 0 and kept frozen; an identical
    manifest is re-derived and proposed every window, so each refresh
    trains on the newest data. Under full label-flip drift the frozen
    line collapses while the refreshed line stays high.
    """
    name = "drift_demo"
    pipelines = [{"publish": _demo_manifest(name, 1.0)}]
    schedule = [{"window": 0, "action": "deploy_initial", "pipeline": name, "version": "v1"}]
    for window in range(1, 7):
        pipelines.append(_derive_op(name, f"v{window}", 1.0))
        schedule.append(
            {"window": window, "action": "propose", "pipeline": name, "version": f"v{window + 1}"}
        )
    return {
        "corpus": {
            "n_windows": 8,
            "docs_per_class_per_window": 300,
            "window_ms": 1000,
            "seed": 42,
            "background_vocab_size": 50,
        },
        "schedule": schedule,
        "train_policy": "latest_window",
        "holdout_fraction": 0.2,
        "ab_margin": 0.0,
        "setup": {"pipelines": pipelines},
    }


def gate_demo_scenario() -> dict:
    """The upgrade-gate demonstration: two genuine improvements, one dud.

    Mirrors the paper's v5..v8 story with versions v1..v4: v2 and v3
    arrive with fresher training data and pass the gate; v4 swaps in a
    crippling selector (keep_fraction 0.05) and is rejected.
    """
    name = "prod_pipeline"
    pipelines = [
        {"publish": _demo_manifest(name, 1.0)},
        _derive_op(name, "v1", 0.95),
        _derive_op(name, "v2", 0.9),
        _derive_op(name, "v3", 0.05),
    ]
    schedule = [
        {"window": 0, "action": "deploy_initial", "pipeline": name, "version": "v1"},
        {"window": 4, "action": "propose", "pipeline": name, "version": "v2"},
        {"window": 5, "action": "propose", "pipeline": name, "version": "v3"},
        {"window": 6, "action": "propose", "pipeline": name, "version": "v4"},
    ]
    return {
        "corpus": {
            "n_windows": 8,
            "docs_per_class_per_window": 300,
            "window_ms": 1000,
            "seed": 7,
            "background_vocab_size": 50,
        },
        "schedule": schedule,
        "train_policy": "latest_window",
        "holdout_fraction": 0.2,
        "ab_margin": 0.0,
        "setup": {"pipelines": pipelines},
    }


def load_scenario_file(path: Path | str) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read scenario file {path}: {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"scenario file {path} is not valid JSON: {exc}") from exc
    return ScenarioConfig.from_obj(obj)
