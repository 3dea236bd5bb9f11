"""Serialization of detection-record streams.

The on-disk format is the contract between the CLI (which writes click
streams) and the analysis tooling (which reads them back): one line per
click, ``trajectory_id,time_ns,channel``, preceded by a header naming the
channels and followed by a footer carrying duration, seed and trajectory
count (so empty trajectories survive the round trip). Times are written
with 17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Sequence

import numpy as np

from .trajectories import DetectionRecord

__all__ = ["write_records", "read_records", "dumps_records", "loads_records"]

_MAGIC = "# sivsim-records v1"


def dumps_records(records: Sequence[DetectionRecord]) -> str:
    if not records:
        raise ValueError("no records to serialize")
    labels = records[0].channel_labels
    duration = records[0].duration
    seed = records[0].seed
    for r in records:
        if r.channel_labels != labels or r.duration != duration or r.seed != seed:
            raise ValueError("records in one stream must share channels, "
                             "duration and seed")
    first_id = min(r.trajectory_id for r in records)
    buf = io.StringIO()
    buf.write(_MAGIC + "\n")
    buf.write("# channels: " + ",".join(labels) + "\n")
    for r in sorted(records, key=lambda r: r.trajectory_id):
        for t, code in zip(r.times, r.channel_codes):
            buf.write(f"{r.trajectory_id},{t:.17g},{labels[int(code)]}\n")
    buf.write(f"# footer duration_ns={duration:.17g} seed={seed} "
              f"n_trajectories={len(records)} first_id={first_id}\n")
    return buf.getvalue()


def loads_records(text: str) -> list[DetectionRecord]:
    lines = text.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError("not a sivsim record stream (bad magic line)")
    if not lines[1].startswith("# channels: "):
        raise ValueError("missing channel header")
    labels = tuple(lines[1][len("# channels: "):].split(","))
    footer = lines[-1]
    if not footer.startswith("# footer "):
        raise ValueError("missing footer (stream truncated?)")
    meta = dict(kv.split("=") for kv in footer[len("# footer "):].split())
    duration = float(meta["duration_ns"])
    seed = int(meta["seed"])
    n_traj = int(meta["n_trajectories"])
    first_id = int(meta["first_id"])

    by_id: dict[int, tuple[list, list]] = {
        first_id + k: ([], []) for k in range(n_traj)}
    code_of = {lab: i for i, lab in enumerate(labels)}
    for line in lines[2:-1]:
        if not line or line.startswith("#"):
            continue
        tid_s, t_s, ch = line.split(",")
        tid = int(tid_s)
        if tid not in by_id:
            raise ValueError(f"trajectory id {tid} outside the declared range")
        by_id[tid][0].append(float(t_s))
        by_id[tid][1].append(code_of[ch])
    out = []
    for tid in sorted(by_id):
        times, codes = by_id[tid]
        out.append(DetectionRecord(
            times=np.asarray(times, dtype=np.float64),
            channel_codes=np.asarray(codes, dtype=np.int16),
            channel_labels=labels, duration=duration,
            trajectory_id=tid, seed=seed))
    return out


def write_records(path, records: Sequence[DetectionRecord]) -> None:
    Path(path).write_text(dumps_records(records))


def read_records(path) -> list[DetectionRecord]:
    return loads_records(Path(path).read_text())
