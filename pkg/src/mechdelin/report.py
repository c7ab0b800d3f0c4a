"""Run records and their CSV / JSON / markdown renderings."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

FORMATS = ("csv", "json", "md")


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    command: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = field(default_factory=artifact_version)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + " ".join(fmt(v) for v in x) + "]"
    return str(x)


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.12g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


def render(record: RunRecord, format: str = "json") -> str:
    if format == "csv":
        cols = _columns(record.rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in record.rows:
            w.writerow([fmt(r.get(c, "")) for c in cols])
        return buf.getvalue()
    if format == "json":
        doc = {
            "command": record.command,
            "config_hash": record.config_hash,
            "version": record.version,
            "config": _plain(record.config),
            "summary": _plain(record.summary),
            "rows": _plain(record.rows),
            "wall_time": round(record.wall_time, 3),
        }
        return json.dumps(doc, indent=2) + "\n"
    if format == "md":
        cols = _columns(record.rows)
        lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
        lines += ["| " + " | ".join(fmt(r.get(c, "")) for c in cols) + " |" for r in record.rows]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {format!r}")


def emit_report(record: RunRecord, format: str = "json", path=None) -> str:
    text = render(record, format)
    if path is not None:
        Path(path).write_text(text)
    return text
