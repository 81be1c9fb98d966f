"""CSV/JSON readers and writers with provenance headers and atomic replacement."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .fit import CriticalPoint
from .synth import TransitionRecord

RECORD_HEADER = ("temperature_K", "field_G", "resistance_mOhm")
POINT_HEADER = ("t", "h_G", "sigma_h_G")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def provenance(config: dict, seed, **extra) -> dict:
    out = {"tool": "filmcrit", "version": __version__, "config_sha256": config_hash(config), "seed": seed}
    out.update(extra)
    return out


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    buf = io.StringIO()
    if meta:
        for key, value in meta.items():
            buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> None:
    atomic_write_text(path, render_csv(header, rows, meta))


def write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv(path: Path) -> tuple[dict, list[str], list[list[str]]]:
    """Return (meta from '# key=value' lines, header, rows)."""
    meta, lines = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, value = body.split("=", 1)
                meta[key.strip()] = value.strip()
            continue
        if line.strip():
            lines.append(line)
    if not lines:
        raise ValueError(f"{path}: no header row")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    return meta, header, [row for row in reader]


def write_records(path: Path, records: Sequence[TransitionRecord], meta: dict | None = None) -> None:
    write_csv(path, RECORD_HEADER, records, meta)


def read_records(path: Path) -> list[TransitionRecord]:
    _, header, rows = read_csv(path)
    if tuple(header[:3]) != RECORD_HEADER:
        raise ValueError(f"{path}: expected header {','.join(RECORD_HEADER)}")
    return [TransitionRecord(float(r[0]), float(r[1]), float(r[2])) for r in rows]


def write_points(path: Path, points: Sequence[CriticalPoint], t_ref: float, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta["t_ref_K"] = repr(float(t_ref))
    write_csv(path, POINT_HEADER, points, meta)


def read_points(path: Path) -> tuple[list[CriticalPoint], float | None]:
    """Points from ``t,h_G[,sigma_h_G]`` CSV and the ``t_ref_K`` header value if present."""
    meta, header, rows = read_csv(path)
    if tuple(header[:2]) != POINT_HEADER[:2]:
        raise ValueError(f"{path}: expected header t,h_G[,sigma_h_G]")
    has_sigma = len(header) >= 3 and header[2] == POINT_HEADER[2]
    points = []
    for row in rows:
        sigma = float(row[2]) if has_sigma and len(row) > 2 and row[2].strip() else float("nan")
        points.append(CriticalPoint(float(row[0]), float(row[1]), sigma))
    t_ref = float(meta["t_ref_K"]) if "t_ref_K" in meta else None
    return points, t_ref
