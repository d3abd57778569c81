"""Sequence files, CSV exports and run manifests.

Sequence files are JSON with fixed keys::

    {"version": 1, "kind": "pulse_sequence" | "schedule", "units": "A-units",
     "start_manifold": "alpha", "events": [{"type": "delay", "duration": ...},
     {"type": "pulse", "phase": ..., "angle": ...}, ...], "meta": {...}}

Floats are written with ``repr`` precision, so reading a file and writing it
again reproduces it byte for byte.  Every write goes to a temporary file in
the destination directory and is moved into place with :func:`os.replace`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .sequence import Delay, ElectronPulse, PulseSequence, Schedule, Trajectory
from .system import Manifold

FORMAT_VERSION = 1
UNITS = ("A-units", "SI")

PathLike = Union[str, os.PathLike]


def write_text_atomic(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _clean(x):
    """JSON-safe copy: NaN becomes null, numpy scalars become Python numbers."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, Manifold):
        return x.value
    return x


# ---------------------------------------------------------------------------
# sequences
# ---------------------------------------------------------------------------


def sequence_to_dict(item, units: str = "A-units", time_scale: float = 1.0, meta: Optional[dict] = None) -> dict:
    """Serialisable form; durations are multiplied by ``time_scale`` on the way out."""
    if units not in UNITS:
        raise ValueError(f"units must be one of {UNITS}")
    if isinstance(item, PulseSequence):
        kind, start = "pulse_sequence", item.start_manifold.value
        sched = item.to_schedule()
    elif isinstance(item, Schedule):
        kind, start, sched = "schedule", None, item
    else:
        raise TypeError(f"cannot serialise {type(item).__name__}")
    events = []
    for e in sched.items:
        if isinstance(e, Delay):
            events.append({"type": "delay", "duration": e.duration * time_scale})
        else:
            events.append({"type": "pulse", "phase": e.phase, "angle": e.angle})
    out = {"version": FORMAT_VERSION, "kind": kind, "units": units, "start_manifold": start, "events": events}
    if meta:
        out["meta"] = _clean(meta)
    return out


def sequence_from_dict(d: dict, time_scale: float = 1.0):
    """Inverse of :func:`sequence_to_dict`; durations are divided by ``time_scale``."""
    if d.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported sequence file version {d.get('version')!r}")
    if d.get("units") not in UNITS:
        raise ValueError(f"unknown units {d.get('units')!r}")
    items = []
    for e in d["events"]:
        if e["type"] == "delay":
            items.append(Delay(float(e["duration"]) / time_scale))
        elif e["type"] == "pulse":
            items.append(ElectronPulse(float(e["phase"]), float(e["angle"])))
        else:
            raise ValueError(f"unknown event type {e['type']!r}")
    if d.get("kind") == "schedule":
        return Schedule(tuple(items))
    delays, trailing = [], False
    for e in items:
        if isinstance(e, Delay):
            if delays and not trailing:
                raise ValueError("consecutive delays in a pulse sequence file")
            delays.append(e.duration)
            trailing = False
        else:
            if not math.isclose(e.angle, math.pi) or e.phase != 0.0:
                raise ValueError("pulse sequences may only contain x pi pulses")
            if trailing or not delays:
                raise ValueError("pulse sequence has adjacent or leading pulses")
            trailing = True
    return PulseSequence(tuple(delays), d.get("start_manifold") or "alpha", trailing)


def save_sequence(path: PathLike, item, units="A-units", time_scale=1.0, meta=None) -> Path:
    return write_text_atomic(path, _dumps(sequence_to_dict(item, units, time_scale, meta)))


def load_sequence_file(path: PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_sequence(path: PathLike, time_scale: float = 1.0):
    return sequence_from_dict(load_sequence_file(path), time_scale)


# ---------------------------------------------------------------------------
# CSV and manifests
# ---------------------------------------------------------------------------


def _csv_text(header, rows, seed) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


def write_trajectory_csv(path: PathLike, traj: Trajectory, seed=None, time_scale: float = 1.0) -> Path:
    rows = ((t * time_scale, *p) for t, p in traj)
    return write_text_atomic(path, _csv_text(("t", "x", "y", "z"), rows, seed))


def write_profile_csv(path: PathLike, profile, seed=None) -> Path:
    rows = zip(profile.offsets, profile.fidelities)
    return write_text_atomic(path, _csv_text(("omega_s", "fidelity"), rows, seed))


def read_csv_rows(path: PathLike) -> list:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    next(reader)
    return [[float(v) for v in row] for row in reader]


MANIFEST_FIELDS = (
    "task",
    "seed",
    "fidelity_alpha",
    "fidelity_beta",
    "converged",
    "segments",
    "total_duration",
)


def write_manifest(path: PathLike, data: dict) -> Path:
    missing = [k for k in MANIFEST_FIELDS if k not in data]
    if missing:
        raise ValueError(f"manifest lacks {missing}")
    return write_text_atomic(path, _dumps(_clean(data)))


def write_json(path: PathLike, data: dict) -> Path:
    return write_text_atomic(path, _dumps(_clean(data)))
