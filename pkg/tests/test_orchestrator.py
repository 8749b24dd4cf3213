import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamci.core_store import Record, canonicalize_records, hash_bytes
from streamci.errors import ComparabilityError, NotFoundError
from streamci.leaderboard import DatasetRef, Run
from streamci.orchestrator import RunRequest, plan, stage_cache_key
from streamci.registry import ParamSpec, StageNode, toposort


def seed_stream(ws, n=12):
    ws.sink.configure_stream("s", 1000)
    records = [
        Record(id=f"d{i}", timestamp=i, text=f"alpha{i % 2} beta{i % 3} x", label=str(i % 2))
        for i in range(n)
    ]
    ws.sink.ingest("s", records)
    ws.sink.close_window("s", 0)
    records2 = [
        Record(id=f"e{i}", timestamp=1000 + i, text=f"alpha{i % 2} beta{i % 3} x", label=str(i % 2))
        for i in range(n)
    ]
    ws.sink.ingest("s", records2)
    ws.sink.close_window("s", 1)
    train = ws.sink.publish_dataset("train", ["p0"], stream="s")
    eval_ds = ws.sink.publish_dataset("eval", ["p1"], stream="s")
    return train, eval_ds


def publish_chain(ws, first_stage=("passthrough", {})):
    fn, params = first_stage
    nodes = [
        StageNode("stage", fn, "v1", params, 0),
        StageNode("evaluate", "train_eval_nb", "v1", {"alpha": 1.0}, 0),
    ]
    edges = [("stage", "evaluate")]
    bindings = {"stage": ["$dataset"], "evaluate": ["stage", "$eval_dataset"]}
    return ws.registry.publish_pipeline("demo", nodes, edges, bindings)


def request(pipeline, train, eval_ds):
    return RunRequest(
        pipeline_name=pipeline.pipeline_name,
        pipeline_version=pipeline.version,
        train_dataset=(train.name, train.version),
        eval_dataset=(eval_ds.name, eval_ds.version),
        requested_by="test",
    )


class TestPlan:
    def test_chain(self, ws):
        pipeline = publish_chain(ws)
        assert plan(pipeline) == ["stage", "evaluate"]

    def test_diamond_lexicographic(self):
        order = toposort(
            ["a", "b", "c", "d"], [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")]
        )
        assert order == ["a", "b", "c", "d"]

    def test_single_node(self):
        assert toposort(["only"], []) == ["only"]

    @settings(max_examples=100, deadline=None)
    @given(data=st.data())
    def test_edges_respected_on_random_dags(self, data):
        n = data.draw(st.integers(1, 8))
        ids = [f"n{i}" for i in range(n)]
        edges = []
        for i in range(n):
            for j in range(i + 1, n):
                if data.draw(st.booleans()):
                    edges.append((ids[i], ids[j]))
        shuffled = data.draw(st.permutations(ids))
        order = toposort(list(shuffled), edges)
        index = {node: k for k, node in enumerate(order)}
        for u, v in edges:
            assert index[u] < index[v]
        assert toposort(list(shuffled), edges) == order  # deterministic


class TestCacheKey:
    NODE = StageNode("n", "f", "v1", {"a": 1}, seed=1)

    def test_deterministic(self):
        assert stage_cache_key(self.NODE, ["x" * 64]) == stage_cache_key(self.NODE, ["x" * 64])

    def test_seed_sensitivity(self):
        other = StageNode("n", "f", "v1", {"a": 1}, seed=2)
        assert stage_cache_key(self.NODE, []) != stage_cache_key(other, [])

    def test_input_order_sensitivity(self):
        h1, h2 = "a" * 64, "b" * 64
        assert stage_cache_key(self.NODE, [h1, h2]) != stage_cache_key(self.NODE, [h2, h1])

    def test_param_sensitivity(self):
        other = StageNode("n", "f", "v1", {"a": 2}, seed=1)
        assert stage_cache_key(self.NODE, []) != stage_cache_key(other, [])


class TestExecute:
    def test_passthrough_forwards_input_hash(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = publish_chain(ws)
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert run.status == "succeeded"
        stage = run.stage_results[0]
        expected = hash_bytes(canonicalize_records(ws.sink.materialize(train)))
        assert stage.output == expected

    def test_second_execution_fully_cached(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = publish_chain(ws)
        first = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        second = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert all(not s.cache_hit for s in first.stage_results)
        assert all(s.cache_hit for s in second.stage_results)
        assert first.metrics == second.metrics
        assert [s.output for s in first.stage_results] == [
            s.output for s in second.stage_results
        ]

    def test_cache_disabled_outputs_identical(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = publish_chain(ws, ("augment_drop", {"drop_prob": 0.3}))
        cached = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        uncached = ws.orchestrator.execute(request(pipeline, train, eval_ds), use_cache=False)
        assert all(not s.cache_hit for s in uncached.stage_results)
        for a, b in zip(cached.stage_results, uncached.stage_results):
            assert a.output == b.output
        assert cached.metrics == uncached.metrics

    def test_metrics_payload_schema(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = publish_chain(ws)
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        sink_result = run.stage_results[-1]
        report = json.loads(ws.store.get(sink_result.output, "metrics"))
        assert set(report) == {"metrics", "model_name", "hyperparams", "n_eval"}
        assert report["model_name"] == "multinomial_nb"
        assert run.metrics == report["metrics"]
        assert run.hyperparams == {"alpha": 1.0}

    def test_builtin_failure_records_failed_run(self, ws):
        # single-class training data makes nb_train raise
        ws.sink.configure_stream("s", 1000)
        records = [Record(f"d{i}", i, "tok", label="0") for i in range(4)]
        ws.sink.ingest("s", records)
        ws.sink.close_window("s", 0)
        ds = ws.sink.publish_dataset("mono", ["p0"], stream="s")
        pipeline = publish_chain(ws)
        run = ws.orchestrator.execute(request(pipeline, ds, ds))
        assert run.status == "failed"
        assert run.failing_node == "evaluate"
        assert run.metrics == {}

    def test_unknown_dataset(self, ws):
        seed_stream(ws)
        pipeline = publish_chain(ws)
        with pytest.raises(NotFoundError):
            ws.orchestrator.execute(
                RunRequest("demo", "v1", ("ghost", "v1"), ("ghost", "v1"))
            )


class TestExternalStages:
    def register_external(self, ws, entry, output_kind="dataset", arity=1):
        return ws.registry.register_function(
            "ext", "external", entry, arity, output_kind
        )

    def pipeline_with_external(self, ws, entry):
        self.register_external(ws, entry)
        nodes = [
            StageNode("ext_stage", "ext", "v1", {}, 0),
            StageNode("evaluate", "train_eval_nb", "v1", {"alpha": 1.0}, 0),
        ]
        return ws.registry.publish_pipeline(
            "extdemo",
            nodes,
            [("ext_stage", "evaluate")],
            {"ext_stage": ["$dataset"], "evaluate": ["ext_stage", "$eval_dataset"]},
        )

    def test_external_passthrough(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = self.pipeline_with_external(ws, 'cp "$DATACI_INPUT_0" "$DATACI_OUTPUT"')
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert run.status == "succeeded"
        expected = hash_bytes(canonicalize_records(ws.sink.materialize(train)))
        assert run.stage_results[0].output == expected

    def test_external_nonzero_exit_fails_run(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = self.pipeline_with_external(ws, "exit 1")
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert run.status == "failed"
        assert run.failing_node == "ext_stage"
        log = (ws.home / "logs" / f"run_{run.run_no}.log").read_text()
        assert "exited 1" in log

    def test_external_malformed_output_fails_run(self, ws):
        train, eval_ds = seed_stream(ws)
        pipeline = self.pipeline_with_external(ws, 'echo "not json" > "$DATACI_OUTPUT"')
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert run.status == "failed"
        assert run.failing_node == "ext_stage"

    def test_external_env_contract(self, ws, tmp_path):
        # the stage sees params and seed and emits a metrics object
        script = tmp_path / "stage.py"
        script.write_text(
            "import json, os\n"
            "params = json.loads(os.environ['DATACI_PARAMS'])\n"
            "seed = int(os.environ['DATACI_SEED'])\n"
            "out = {'metrics': {'accuracy': params['level'] + seed}}\n"
            "open(os.environ['DATACI_OUTPUT'], 'w').write(json.dumps(out))\n"
        )
        ws.registry.register_function(
            "extmetrics", "external", f'python3 "{script}"', 2, "metrics",
            [ParamSpec("level", "float", 0.25)],
        )
        train, eval_ds = seed_stream(ws)
        nodes = [StageNode("m", "extmetrics", "v1", {}, 3)]
        pipeline = ws.registry.publish_pipeline(
            "envdemo", nodes, [], {"m": ["$dataset", "$eval_dataset"]}
        )
        run = ws.orchestrator.execute(request(pipeline, train, eval_ds))
        assert run.status == "succeeded"
        assert run.metrics == {"accuracy": 3.25}
        assert run.model_name == "extmetrics"  # fallback when stage names none


class TestABTest:
    def fake_run(self, ws, value, version="v1", eval_hash="e" * 64, metrics=None):
        return ws.leaderboard.record_run(
            Run(
                run_no=0,
                pipeline_name="demo",
                pipeline_version=version,
                manifest_hash="m" * 64,
                train_dataset=DatasetRef("train", "v1", "t" * 64),
                eval_dataset=DatasetRef("eval", "v1", eval_hash),
                model_name="multinomial_nb",
                hyperparams={},
                metrics={"accuracy": value} if metrics is None else metrics,
                status="succeeded",
                failing_node=None,
                stage_results=(),
                started_at=0,
                finished_at=0,
            )
        )

    def test_challenger_above_passes(self, ws):
        champion = self.fake_run(ws, 0.80)
        challenger = self.fake_run(ws, 0.85, version="v2")
        decision = ws.orchestrator.ab_test(champion, challenger, "accuracy", 0.0)
        assert decision.passed is True
        assert decision.champion_value == 0.80
        assert decision.challenger_value == 0.85

    def test_tie_favors_champion(self, ws):
        champion = self.fake_run(ws, 0.80)
        challenger = self.fake_run(ws, 0.80, version="v2")
        assert ws.orchestrator.ab_test(champion, challenger, "accuracy", 0.0).passed is False

    def test_below_champion_fails(self, ws):
        champion = self.fake_run(ws, 0.80)
        challenger = self.fake_run(ws, 0.70, version="v2")
        assert ws.orchestrator.ab_test(champion, challenger, "accuracy", 0.0).passed is False

    def test_margin_must_be_cleared(self, ws):
        champion = self.fake_run(ws, 0.80)
        challenger = self.fake_run(ws, 0.84, version="v2")
        assert ws.orchestrator.ab_test(champion, challenger, "accuracy", 0.05).passed is False

    def test_gate_antisymmetry(self, ws):
        a = self.fake_run(ws, 0.80)
        b = self.fake_run(ws, 0.85, version="v2")
        assert ws.orchestrator.ab_test(a, b, "accuracy", 0.0).passed
        assert not ws.orchestrator.ab_test(b, a, "accuracy", 0.0).passed

    def test_different_eval_datasets_rejected(self, ws):
        a = self.fake_run(ws, 0.8, eval_hash="a" * 64)
        b = self.fake_run(ws, 0.9, eval_hash="b" * 64)
        with pytest.raises(ComparabilityError):
            ws.orchestrator.ab_test(a, b, "accuracy", 0.0)

    def test_missing_metric_rejected(self, ws):
        a = self.fake_run(ws, 0.8)
        b = self.fake_run(ws, 0.9, metrics={"other": 0.9})
        with pytest.raises(NotFoundError):
            ws.orchestrator.ab_test(a, b, "accuracy", 0.0)

    def test_decision_persisted(self, ws):
        a = self.fake_run(ws, 0.8)
        b = self.fake_run(ws, 0.9, version="v2")
        ws.orchestrator.ab_test(a, b, "accuracy", 0.0)
        rows = (ws.home / "index" / "abtests.jsonl").read_text().splitlines()
        assert len(rows) == 1
        assert json.loads(rows[0])["passed"] is True
