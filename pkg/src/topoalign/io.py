"""CSV/JSON writers for event logs, snapshots and study reports."""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .particle_sim import EventLog, Snapshot

__all__ = [
    "TIMESTAMP_PREFIX",
    "CONFIG_PREFIX",
    "fmt",
    "write_event_log",
    "write_snapshots",
    "read_snapshot",
    "write_table",
    "read_table",
    "comparable_lines",
]

TIMESTAMP_PREFIX = "# generated: "
CONFIG_PREFIX = "# config: "


def fmt(value) -> str:
    """Stable text form: shortest round-trip repr for floats, 0/1 for flags."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_event_log(path, events: EventLog) -> None:
    d = events.velocities.shape[1] if events.velocities.ndim == 2 else 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "i", "j"] + [f"v_copied{c}" for c in range(d)])
        for k in range(len(events)):
            w.writerow([fmt(float(events.times[k])), int(events.choosers[k]),
                        int(events.partners[k])]
                       + [fmt(float(c)) for c in events.velocities[k]])


def write_snapshots(out_dir, prefix: str, snapshots: list[Snapshot]) -> Path:
    """One CSV per snapshot time plus ``<prefix>_manifest.json``."""
    out_dir = Path(out_dir)
    files = []
    for k, snap in enumerate(snapshots):
        name = f"{prefix}_snap{k:04d}.csv"
        d = snap.positions.shape[1]
        with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["particle_index"] + [f"x{c}" for c in range(d)]
                       + [f"v{c}" for c in range(d)])
            for p in range(snap.positions.shape[0]):
                w.writerow([p] + [fmt(float(c)) for c in snap.positions[p]]
                           + [fmt(float(c)) for c in snap.velocities[p]])
        files.append(name)
    manifest = out_dir / f"{prefix}_manifest.json"
    manifest.write_text(json.dumps({"times": [s.time for s in snapshots], "files": files},
                                   indent=2) + "\n", encoding="utf-8")
    return manifest


def read_snapshot(path):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("x"))
    arr = np.array([[float(c) for c in r[1:]] for r in body])
    return arr[:, :d], arr[:, d:]


def write_table(path, columns, rows, *, provenance: str | None = None,
                timestamp: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if timestamp:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            fh.write(f"{TIMESTAMP_PREFIX}{stamp}\n")
        if provenance is not None:
            fh.write(f"{CONFIG_PREFIX}{provenance}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def read_table(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def comparable_lines(path) -> list[str]:
    """File lines minus the timestamp line, for determinism checks."""
    with open(path, encoding="utf-8") as fh:
        return [ln for ln in fh if not ln.startswith(TIMESTAMP_PREFIX)]
