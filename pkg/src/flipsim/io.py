"""File formats: binary particle snapshots and flat key-value configs.

Snapshot layout (little-endian): magic "FLIP", u32 version, u64 count,
then six float32 arrays in SoA order (pos_x, pos_y, pos_z, vel_x, vel_y,
vel_z). This mirrors the in-memory layout, so I/O is a straight copy;
note the simulation state is float64, so values are quantized once on
the first write.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import SnapshotFormatError
from .particles import ParticleSet

MAGIC = b"FLIP"
VERSION = 1


def write_snapshot(path, particles: ParticleSet) -> None:
    n = particles.count
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", n))
        for arr in particles.arrays():
            fh.write(arr.astype("<f4").tobytes())


def read_snapshot(path) -> ParticleSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise SnapshotFormatError(path, 0, "bad magic")
    if len(data) < 16:
        raise SnapshotFormatError(path, len(data), "truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise SnapshotFormatError(path, 4, f"unsupported version {version}")
    (count,) = struct.unpack_from("<Q", data, 8)
    need = 16 + 6 * 4 * count
    if len(data) != need:
        raise SnapshotFormatError(
            path, min(len(data), need),
            f"expected {need} bytes for {count} particles, got {len(data)}")
    arrays = []
    off = 16
    for _ in range(6):
        arrays.append(np.frombuffer(data, dtype="<f4", count=count,
                                    offset=off).astype(np.float64))
        off += 4 * count
    return ParticleSet(*arrays)


def parse_config(text: str) -> dict[str, str]:
    """Flat `key = value` lines; '#' starts a comment; blanks ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_config(values: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())
