"""File formats: fringe-trace CSV, phasor CSV, fit JSON, result bundles.

Traces are CSV with the exact header ``freq_ghz,counts`` plus a JSON
sidecar (``<name>.meta.json``) carrying the synthesis metadata and schema
version.  Floats are written with 17 significant digits so a write/read
round trip is bit-exact.  Parsing is strict: no NaN, strictly increasing
frequency, malformed rows reported with their line number.

A :class:`ResultBundle` collects the files of one command run and writes a
``manifest.json`` with sha256 content hashes; identical config and seed
must reproduce byte-identical data products.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .extraction import PhasorPoint
from .interferometer import FringeTrace
from .lm import FitResult

SCHEMA_VERSION = "wgphase/1"
TRACE_HEADER = "freq_ghz,counts"
PHASOR_HEADER = "freq_ghz,phase_rad,phase_err,amp_ratio,amp_err,offset_ratio,offset_err"


class TraceParseError(ValueError):
    """Malformed trace or phasor file; message carries the line number."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_trace_csv(trace: FringeTrace, path) -> Path:
    path = Path(path)
    lines = [TRACE_HEADER]
    lines += [f"{_fmt(f)},{_fmt(c)}" for f, c in zip(trace.freq, trace.intensity)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"schema": SCHEMA_VERSION, **(trace.meta or {})}
    _sidecar_path(path).write_text(_json_dumps(meta), encoding="utf-8")
    return path


def parse_trace_csv(path) -> FringeTrace:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise TraceParseError(f"{path}: not valid UTF-8 ({exc})") from exc
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise TraceParseError(f"{path}:1: expected header {TRACE_HEADER!r}, found {found!r}")
    freqs: List[float] = []
    counts: List[float] = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"{path}:{lineno}: expected 2 comma-separated fields, "
                                  f"got {len(parts)}")
        try:
            f_val, c_val = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise TraceParseError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
        if not (math.isfinite(f_val) and math.isfinite(c_val)):
            raise TraceParseError(f"{path}:{lineno}: non-finite value not allowed")
        if freqs and f_val <= freqs[-1]:
            raise TraceParseError(f"{path}:{lineno}: freq_ghz must be strictly increasing "
                                  f"({f_val!r} after {freqs[-1]!r})")
        freqs.append(f_val)
        counts.append(c_val)
    if not freqs:
        raise TraceParseError(f"{path}: no data rows")
    meta = {}
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    return FringeTrace(freq=np.array(freqs), intensity=np.array(counts), meta=meta)


def write_phasors_csv(points: Sequence[PhasorPoint], path, meta: dict | None = None) -> Path:
    path = Path(path)
    lines = [PHASOR_HEADER]
    for q in points:
        lines.append(",".join(_fmt(v) for v in (
            q.freq, q.phase_shift, q.phase_err, q.amp_ratio, q.amp_err,
            q.offset_ratio, q.offset_err)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    side = {"schema": SCHEMA_VERSION,
            "low_contrast_freqs": [q.freq for q in points if q.low_contrast]}
    side.update(meta or {})
    _sidecar_path(path).write_text(_json_dumps(side), encoding="utf-8")
    return path


def parse_phasors_csv(path) -> List[PhasorPoint]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != PHASOR_HEADER:
        found = lines[0].strip() if lines else "<empty file>"
        raise TraceParseError(f"{path}:1: expected header {PHASOR_HEADER!r}, found {found!r}")
    sidecar = _sidecar_path(path)
    low_set = set()
    meta = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        low_set = set(meta.get("low_contrast_freqs", []))
    points = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 7:
            raise TraceParseError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as exc:
            raise TraceParseError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
        points.append(PhasorPoint(freq=vals[0], phase_shift=vals[1], phase_err=vals[2],
                                  amp_ratio=vals[3], amp_err=vals[4], offset_ratio=vals[5],
                                  offset_err=vals[6], low_contrast=vals[0] in low_set))
    if not points:
        raise TraceParseError(f"{path}: no data rows")
    return points


def phasor_file_meta(path) -> dict:
    sidecar = _sidecar_path(Path(path))
    if sidecar.exists():
        return json.loads(sidecar.read_text(encoding="utf-8"))
    return {}


def fit_result_json(result: FitResult, extra: dict | None = None) -> str:
    payload = {"schema": SCHEMA_VERSION, **result.as_dict()}
    payload["covariance"] = [[float(v) for v in row] for row in result.covariance]
    if extra:
        payload.update(extra)
    return _json_dumps(payload)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


class ResultBundle:
    """Output directory of one command run, finished off with a manifest.

    Files are registered as they are written; ``finalize`` records sha256
    hashes and sizes so reproducibility is checkable after the fact.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def register(self, name: str):
        if name not in self.files:
            self.files.append(name)

    def write_text(self, name: str, content: str) -> Path:
        path = self.path(name)
        path.write_text(content, encoding="utf-8")
        self.register(name)
        return path

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, _json_dumps(obj))

    def write_trace(self, name: str, trace: FringeTrace) -> Path:
        path = write_trace_csv(trace, self.path(name))
        self.register(name)
        self.register(name + ".meta.json")
        return path

    def write_phasors(self, name: str, points, meta=None) -> Path:
        path = write_phasors_csv(points, self.path(name), meta=meta)
        self.register(name)
        self.register(name + ".meta.json")
        return path

    def write_table(self, name: str, header: str, columns) -> Path:
        rows = zip(*columns)
        lines = [header] + [",".join(_fmt(v) for v in row) for row in rows]
        return self.write_text(name, "\n".join(lines) + "\n")

    def finalize(self) -> Path:
        entries = {}
        for name in sorted(self.files):
            data = self.path(name).read_bytes()
            entries[name] = {"sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)}
        manifest = {"schema": SCHEMA_VERSION, "files": entries}
        path = self.path("manifest.json")
        path.write_text(_json_dumps(manifest), encoding="utf-8")
        return path
