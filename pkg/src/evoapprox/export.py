"""Pareto-front extraction from archive files for external plotting."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path


def load_archive(path: str | Path) -> list[dict]:
    """Accept both a bare record list and the wrapper cmd_search writes."""
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        data = data.get("archive", [])
    if not isinstance(data, list):
        raise ValueError("archive file holds neither a record list nor an archive object")
    return data


def front_rows(records: list[dict]) -> list[tuple]:
    """(cost, precision) pairs, cost ascending: complexity, or speed when present."""
    rows = []
    for r in records:
        if r.get("speed") is not None:
            cost = float(r["speed"])
        else:
            cost = int(r["complexity"])
        rows.append((cost, float(r["precision"])))
    return sorted(rows)


def front_csv(records: list[dict]) -> str:
    speed_front = any(r.get("speed") is not None for r in records)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["speed" if speed_front else "complexity", "precision"])
    w.writerows(front_rows(records))
    return buf.getvalue()


def front_json(records: list[dict], stamp: dict | None = None) -> dict:
    return {"stamp": stamp or {}, "front": [
        {"cost": c, "precision": p} for c, p in front_rows(records)]}
