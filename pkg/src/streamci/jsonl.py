"""Append-only JSON Lines files backing the platform's indices."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import StoreError


def append_row(path: Path, row: dict, sort_keys: bool = False) -> None:
    """Append one JSON object line, creating parent directories as needed.

    The write is flushed and fsynced so an index row is never half-visible
    to a reader that starts after this call returns.
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        line = json.dumps(row, sort_keys=sort_keys, separators=(",", ":"), ensure_ascii=False)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
    except OSError as exc:
        raise StoreError(f"failed to append to {path}: {exc}") from exc


def read_rows(path: Path) -> list[dict]:
    """Read every row; missing file means no rows yet."""
    if not path.exists():
        return []
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
