"""Config files, tab-separated traces and binary field snapshots."""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .energy import Field

MAGIC = b"CNCS"
VERSION = 1
KINDS = {"AC": 0, "GL": 1}
_HEADER = struct.Struct("<4sIIIIdd")


class ConfigError(ValueError):
    pass


def parse_config(text: str, known: set[str] | None = None) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment.  Unknown or repeated keys fault."""
    out: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not k:
            raise ConfigError(f"line {n}: empty key")
        if known is not None and k not in known:
            raise ConfigError(f"line {n}: unknown key {k!r}")
        if k in out:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        out[k] = v
    return out


def read_config(path, known: set[str] | None = None) -> dict[str, str]:
    return parse_config(Path(path).read_text(encoding="utf-8"), known)


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.12g" % float(v)


def write_trace(path, columns, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(format_value(v) for v in row) + "\n")


def read_trace(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    cols = lines[0].split("\t")
    data = np.array([[float(x) for x in ln.split("\t")] for ln in lines[1:]]).reshape(-1, len(cols))
    return cols, data


def write_snapshot(path, field: Field, t: float) -> None:
    """Little-endian header then f64 node values; GL stores component 0 then component 1."""
    s = np.ascontiguousarray(field.samples, dtype="<f8")
    ny, nx = s.shape[-2:]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, KINDS[field.kind], nx, ny, float(field.epsilon), float(t)))
        fh.write(s.tobytes())


def read_snapshot(path):
    """Returns (Field, t)."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("snapshot truncated")
    magic, version, kind, nx, ny, eps, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError("not a snapshot file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    names = {v: k for k, v in KINDS.items()}
    if kind not in names:
        raise ValueError(f"unknown field kind {kind}")
    ncomp = 1 if kind == 0 else 2
    count = ncomp * nx * ny
    body = raw[_HEADER.size :]
    if len(body) != 8 * count:
        raise ValueError(f"snapshot body has {len(body)} bytes, expected {8 * count}")
    vals = np.frombuffer(body, dtype="<f8").astype(float)
    shape = (ny, nx) if ncomp == 1 else (2, ny, nx)
    return Field(names[kind], vals.reshape(shape), eps), t
