"""Line-delimited record formats for reads and solve reports.

One JSON object per line. Floats are emitted with Python's shortest exact
representation, so parse(emit(x)) round-trips bit for bit. Infinities are not
representable in the formats; fields that may hold them encode as null.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import Read
from .solver import Event, SolveReport

REPORT_VERSION = 1


class FormatError(ValueError):
    """Malformed record; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class ReadRecord:
    id: str
    dx: float
    z: np.ndarray
    tau_true: np.ndarray | None = None
    d_true: np.ndarray | None = None

    def to_read(self) -> Read:
        from .profile import TimingProfile

        gt = TimingProfile(self.tau_true, self.dx) if self.tau_true is not None else None
        gd = self.d_true.astype(np.int8) if self.d_true is not None else None
        return Read(z=self.z, dx=self.dx, ground_truth=gt, ground_truth_d=gd)


def rle_encode(d: np.ndarray) -> list[list[int]]:
    """Run-length encode a binary vector as [[value, count], ...]."""
    d = np.asarray(d)
    out: list[list[int]] = []
    for v in d:
        v = int(v)
        if out and out[-1][0] == v:
            out[-1][1] += 1
        else:
            out.append([v, 1])
    return out


def rle_decode(runs: list[list[int]]) -> np.ndarray:
    return np.concatenate([np.full(c, v, dtype=np.int8) for v, c in runs]) if runs else np.zeros(0, dtype=np.int8)


def _dumps(obj) -> str:
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def write_reads(path: str | Path, records: list[ReadRecord]) -> None:
    with open(path, "w") as fh:
        for r in records:
            obj = {"id": r.id, "dx": r.dx, "z": [float(x) for x in r.z]}
            if r.tau_true is not None:
                obj["tau_true"] = [float(x) for x in r.tau_true]
            if r.d_true is not None:
                obj["d_true"] = [int(x) for x in r.d_true]
            fh.write(_dumps(obj) + "\n")


def parse_reads(path: str | Path) -> list[ReadRecord]:
    records = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", ln) from exc
            try:
                z = np.asarray(obj["z"], dtype=float)
                rec = ReadRecord(
                    id=str(obj["id"]),
                    dx=float(obj["dx"]),
                    z=z,
                    tau_true=(
                        np.asarray(obj["tau_true"], dtype=float) if "tau_true" in obj else None
                    ),
                    d_true=(np.asarray(obj["d_true"], dtype=int) if "d_true" in obj else None),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"bad read record ({exc})", ln) from exc
            for arr in (rec.tau_true, rec.d_true):
                if arr is not None and arr.size != z.size:
                    raise FormatError("array length mismatch", ln)
            if np.any(z < 0):
                raise FormatError("z entries must be nonnegative", ln)
            records.append(rec)
    return records


def _event_obj(e: Event) -> dict:
    return {
        "kind": e.kind,
        "index": e.index + 1,  # 1-based in files
        "time": e.time,
        "speed": e.speed,
        "direction": e.direction,
    }


def report_to_obj(read_id: str, report: SolveReport, read: Read | None = None) -> dict:
    obj = {
        "version": REPORT_VERSION,
        "id": read_id,
        "solver": report.solver,
        "dx": report.tau_star.dx,
        "objective": report.objective,
        "d_star": rle_encode(report.d_star),
        "tau_star": [float(x) for x in report.tau_star.values],
        "breakpoints": [int(i) + 1 for i in report.breakpoints.indices],
        "events": [_event_obj(e) for e in report.events],
        "per_candidate": [
            {"F": (None if not np.isfinite(c.objective) else c.objective), "kkt": c.kkt, "ms": c.ms}
            for c in report.per_candidate
        ],
        "wall_ms": report.wall_ms,
        "degenerate": report.degenerate,
    }
    if read is not None and read.ground_truth is not None:
        tt = read.ground_truth.values
        err = float(np.max(np.abs(report.tau_star.values - tt)))
        obj["recovery"] = {
            "max_abs_err": err,
            "rel_max_err": err / max(float(np.max(np.abs(tt))), 1e-300),
        }
        if read.ground_truth_d is not None:
            obj["recovery"]["d_match_frac"] = float(
                np.mean(report.d_star == read.ground_truth_d)
            )
    return obj


def write_reports(path: str | Path, objs: list[dict]) -> None:
    with open(path, "w") as fh:
        for obj in objs:
            fh.write(_dumps(obj) + "\n")


def parse_reports(path: str | Path) -> list[dict]:
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", ln) from exc
            version = obj.get("version")
            if version != REPORT_VERSION:
                raise FormatError(
                    f"unsupported report version {version!r} (expected {REPORT_VERSION})", ln
                )
            out.append(obj)
    return out
