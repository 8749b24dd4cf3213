"""Workspace: one home directory wiring together every platform component.

All durable state lives under the home directory (env STREAMCI_HOME,
default ./streamci_home). Constructing a Workspace rebuilds every index
from disk, which is what makes the CLI and the HTTP service stateless
across restarts.
"""

from __future__ import annotations

import os
from pathlib import Path

from .core_store import ObjectStore
from .data_sink import DataSink
from .evaluator import BUILTINS
from .leaderboard import Leaderboard
from .orchestrator import Orchestrator
from .registry import ParamSpec, Registry

HOME_ENV = "STREAMCI_HOME"
DEFAULT_HOME = "./streamci_home"


def resolve_home(home: str | Path | None = None) -> Path:
    return Path(home or os.environ.get(HOME_ENV) or DEFAULT_HOME)


class Workspace:
    def __init__(self, home: str | Path | None = None):
        self.home = resolve_home(home)
        self.store = ObjectStore(self.home)
        self.sink = DataSink(self.home, self.store)
        self.registry = Registry(self.home, self.store)
        self.leaderboard = Leaderboard(self.home)
        self.orchestrator = Orchestrator(
            self.store, self.sink, self.registry, self.leaderboard, self.home
        )

    def init(self) -> None:
        """Create the home layout and seed the zoo with the builtin functions."""
        for sub in ("objects", "index", "sink", "series", "logs"):
            (self.home / sub).mkdir(parents=True, exist_ok=True)
        self.seed_builtin_functions()

    def seed_builtin_functions(self) -> None:
        """Register v1 of every builtin not yet present. Idempotent."""
        for entry, spec in BUILTINS.items():
            if not self.registry.function_exists(entry):
                self.registry.register_function(
                    name=entry,
                    kind="builtin",
                    entry=entry,
                    input_arity=spec.input_arity,
                    output_kind=spec.output_kind,
                    param_schema=[
                        ParamSpec(name, "float" if isinstance(default, float) else "int", default)
                        for name, default in spec.param_defaults.items()
                    ],
                )
