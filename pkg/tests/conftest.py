from __future__ import annotations

import pytest

from streamci.core_store import Record
from streamci.workspace import Workspace


@pytest.fixture
def ws(tmp_path) -> Workspace:
    """A fresh initialized workspace in a temp home."""
    workspace = Workspace(tmp_path / "home")
    workspace.init()
    return workspace


def make_records(n: int, window_ms: int = 1000, labeled: bool = True) -> list[Record]:
    """n alternating-label records spread across windows of width window_ms."""
    records = []
    for i in range(n):
        records.append(
            Record(
                id=f"r{i}",
                timestamp=i * (window_ms // 4 or 1),
                text=f"tok{i % 7} tok{i % 3} common",
                label=("0" if i % 2 == 0 else "1") if labeled else None,
            )
        )
    return records


@pytest.fixture
def labeled_window(ws):
    """One closed window of labeled records plus its published dataset."""
    ws.sink.configure_stream("s", 1000)
    records = [
        Record(id=f"d{i}", timestamp=i, text=f"alpha{i % 2} beta{i % 3} gamma", label=str(i % 2))
        for i in range(20)
    ]
    ws.sink.ingest("s", records)
    ws.sink.close_window("s", 0)
    dataset = ws.sink.publish_dataset("train", ["p0"], stream="s")
    return ws, records, dataset
