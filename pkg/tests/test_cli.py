import json

import pytest
from click.testing import CliRunner

from streamci.cli import main

MANIFEST = {
    "name": "demo",
    "nodes": [
        {"id": "select", "function": "select_recent", "version": "v1",
         "params": {"keep_fraction": 1.0}, "seed": 0},
        {"id": "evaluate", "function": "train_eval_nb", "version": "v1",
         "params": {"alpha": 1.0}, "seed": 0},
    ],
    "edges": [["select", "evaluate"]],
    "bindings": {"select": ["$dataset"], "evaluate": ["select", "$eval_dataset"]},
}


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def home(tmp_path):
    return str(tmp_path / "home")


def invoke(runner, home, *args, expect=0):
    result = runner.invoke(main, ["--home", home, *args], catch_exceptions=False)
    assert result.exit_code == expect, result.output + (result.stderr or "")
    return result


def write_records(path, n=16, window=0):
    with open(path, "w") as fh:
        for i in range(n):
            fh.write(
                json.dumps(
                    {
                        "id": f"r{window}_{i}",
                        "timestamp": window * 1000 + i,
                        "text": f"alpha{i % 2} beta{i % 3}",
                        "label": str(i % 2),
                    }
                )
                + "\n"
            )


class TestBasicFlow:
    def test_end_to_end(self, runner, home, tmp_path):
        invoke(runner, home, "init")
        for w in range(2):
            path = tmp_path / f"w{w}.jsonl"
            write_records(path, window=w)
            out = invoke(runner, home, "ingest", "-s", "s", "-f", str(path), "--window-ms", "1000")
            assert json.loads(out.output)["accepted"] == 16
        invoke(runner, home, "close-window", "-s", "s", "-w", "0")
        invoke(runner, home, "close-window", "-s", "s", "-w", "1")
        out = invoke(runner, home, "dataset", "publish", "train", "-p", "p0")
        assert json.loads(out.output)["version"] == "v1"
        invoke(runner, home, "dataset", "publish", "eval", "-p", "p1")

        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(json.dumps(MANIFEST))
        out = invoke(runner, home, "pipeline", "publish", "-f", str(manifest_path))
        assert json.loads(out.output)["version"] == "v1"

        out = invoke(
            runner, home, "run", "-p", "demo", "-v", "v1",
            "--train", "train@v1", "--eval", "eval@v1",
        )
        run1 = json.loads(out.output)
        assert run1["status"] == "succeeded"
        out = invoke(
            runner, home, "run", "-p", "demo", "-v", "v1",
            "--train", "train@v1", "--eval", "eval@v1",
        )
        run2 = json.loads(out.output)
        assert all(s["cache_hit"] for s in run2["stage_results"])

        out = invoke(runner, home, "runs", "list", "--sort", "accuracy")
        assert len(json.loads(out.output)) == 2

        out = invoke(runner, home, "abtest", "--champion", "1", "--challenger", "2")
        assert json.loads(out.output)["passed"] is False

    def test_lineage_chain(self, runner, home, tmp_path):
        invoke(runner, home, "init")
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(json.dumps(MANIFEST))
        invoke(runner, home, "pipeline", "publish", "-f", str(manifest_path))
        for base, kf in (("v1", "0.9"), ("v2", "0.8")):
            invoke(
                runner, home, "pipeline", "derive", "demo", base,
                "--replace", "select", "--function", "select_recent",
                "--function-version", "v1", "--params", f'{{"keep_fraction": {kf}}}',
            )
        out = invoke(runner, home, "pipeline", "lineage", "demo", "v3")
        assert json.loads(out.output) == ["v3", "v2", "v1"]
        out = invoke(runner, home, "pipeline", "diff", "demo", "v1", "v2")
        assert json.loads(out.output) == [{"change": "modified", "node_id": "select"}]


class TestScenarioCommand:
    def test_run_twice_identical_csv(self, runner, tmp_path):
        from test_replay import tiny_scenario

        scenario_path = tmp_path / "scenario.json"
        scenario_path.write_text(json.dumps(tiny_scenario().to_obj()))
        outputs = []
        for sub in ("h1", "h2"):
            out_csv = tmp_path / f"{sub}.csv"
            result = invoke(
                CliRunner(), str(tmp_path / sub), "scenario", "run",
                "-f", str(scenario_path), "-o", str(out_csv),
            )
            assert json.loads(result.output)["series"]
            outputs.append(out_csv.read_bytes())
        assert outputs[0] == outputs[1]


class TestErrorsAndUsage:
    def test_domain_error_exits_one(self, runner, home):
        invoke(runner, home, "init")
        result = runner.invoke(
            main, ["--home", home, "close-window", "-s", "ghost", "-w", "0"]
        )
        assert result.exit_code == 1
        error = json.loads(result.stderr)
        assert error["code"] == "not_found"

    def test_out_of_order_close_is_order_error(self, runner, home, tmp_path):
        invoke(runner, home, "init")
        path = tmp_path / "w.jsonl"
        write_records(path)
        invoke(runner, home, "ingest", "-s", "s", "-f", str(path), "--window-ms", "1000")
        result = runner.invoke(main, ["--home", home, "close-window", "-s", "s", "-w", "5"])
        assert result.exit_code == 1
        assert json.loads(result.stderr)["code"] == "order"

    def test_usage_error_exits_two(self, runner, home):
        result = runner.invoke(main, ["--home", home, "no-such-command"])
        assert result.exit_code == 2
        result = runner.invoke(main, ["--home", home, "ingest"])  # missing options
        assert result.exit_code == 2

    def test_stdout_is_canonical_json(self, runner, home):
        result = invoke(runner, home, "init")
        line = result.output.strip()
        assert line == json.dumps(
            json.loads(line), sort_keys=True, separators=(",", ":"), ensure_ascii=False
        )
