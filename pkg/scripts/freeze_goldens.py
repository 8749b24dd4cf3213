#!/usr/bin/env python3
"""Regenerate the canned scenario configs and their golden outputs.

Run from the repo root after any intentional change to the simulation or
classifier, then review the diff before committing.
"""

import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from streamci.core_store import canonical_json
from streamci.replay import (
    ScenarioConfig,
    default_drift_scenario,
    gate_demo_scenario,
    run_scenario,
)
from streamci.workspace import Workspace

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "testdata" / "scenarios"
GOLDEN = ROOT / "testdata" / "golden"


def freeze(name: str, config_obj: dict) -> None:
    SCENARIOS.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)
    (SCENARIOS / f"{name}.json").write_text(json.dumps(config_obj, indent=2) + "\n")
    with tempfile.TemporaryDirectory() as tmp:
        ws = Workspace(tmp)
        ws.init()
        series = run_scenario(ws, ScenarioConfig.from_obj(config_obj))
        csv_bytes = (ws.home / "series" / f"{series.scenario_id}.csv").read_bytes()
        (GOLDEN / f"{name}_series.csv").write_bytes(csv_bytes)
        summary = {
            "timeline": [[w, v] for w, v in series.timeline],
            "gates": series.gates,
            "series": {v: [[w, x] for w, x in pts] for v, pts in series.series.items()},
        }
        (GOLDEN / f"{name}_summary.json").write_text(canonical_json(summary) + "\n")
    print(f"froze {name}: {len(csv_bytes)} CSV bytes")


if __name__ == "__main__":
    freeze("drift_default", default_drift_scenario())
    freeze("gate_demo", gate_demo_scenario())
