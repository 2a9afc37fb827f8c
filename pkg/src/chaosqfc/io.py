"""Serialization: binary envelope container, CSV exports, run manifests.

Binary container layout (little endian):
    magic   4 bytes  b"CENV"
    version u32      1
    flags   u32      bit 0: real-only payload
    count   u64
    dt      f64
    carrier f64
    payload count complex128 (interleaved re/im f64) or count f64 if real-only

CSV output uses a fixed '%.12e' format so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .signals import ComplexEnvelope

_MAGIC = b"CENV"
_HEADER = struct.Struct("<4sIIQdd")
FLAG_REAL_ONLY = 0x1


def save_envelope(env: ComplexEnvelope, path, real_only: bool = False) -> None:
    flags = FLAG_REAL_ONLY if real_only else 0
    header = _HEADER.pack(_MAGIC, 1, flags, env.n, env.dt, env.carrier_offset)
    if real_only:
        payload = np.ascontiguousarray(env.samples.real, dtype="<f8").tobytes()
    else:
        payload = np.ascontiguousarray(env.samples, dtype="<c16").tobytes()
    Path(path).write_bytes(header + payload)


def load_envelope(path) -> ComplexEnvelope:
    raw = Path(path).read_bytes()
    magic, version, flags, count, dt, carrier = _HEADER.unpack(raw[: _HEADER.size])
    if magic != _MAGIC:
        raise ValueError(f"{path}: not an envelope container")
    if version != 1:
        raise ValueError(f"{path}: unsupported container version {version}")
    body = raw[_HEADER.size:]
    if flags & FLAG_REAL_ONLY:
        samples = np.frombuffer(body, dtype="<f8", count=count).astype(np.complex128)
    else:
        samples = np.frombuffer(body, dtype="<c16", count=count).copy()
    return ComplexEnvelope(samples, dt, carrier)


def _fmt(x: float) -> str:
    return f"{x:.12e}"


def write_envelope_csv(env: ComplexEnvelope, path) -> None:
    lines = ["t_s,re,im"]
    t = env.times
    for i in range(env.n):
        lines.append(f"{_fmt(t[i])},{_fmt(env.samples[i].real)},{_fmt(env.samples[i].imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_spectrum_csv(frequencies, psd, rbw: float, path) -> None:
    lines = ["freq_hz,psd,rbw_hz"]
    for f, p in zip(frequencies, psd):
        lines.append(f"{_fmt(f)},{_fmt(p)},{_fmt(rbw)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_table_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = zip(*columns)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def sha256_of(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
