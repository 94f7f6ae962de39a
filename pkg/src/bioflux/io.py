"""On-disk formats: binary snapshots, diagnostics CSV and 16-bit PGM images.

Snapshot layout (little-endian)::

    magic "BCNV" | version u32 (=1) | nx u32 | ny u32 | dx f64 | dy f64
    | t f64 | step u64 | n[ny*nx] | c[ny*nx] | u[ny*(nx+1)] | v[(ny+1)*nx]

Arrays are stored row-major with y outermost, exactly as held in memory.
"""
from __future__ import annotations

import csv
import dataclasses
import struct

import numpy as np

from .errors import InvalidParameter, SnapshotFormatError, UnsupportedVersion
from .grid import Faces, Grid

MAGIC = b"BCNV"
VERSION = 1
_HEADER = struct.Struct("<4sIIIdddQ")


@dataclasses.dataclass(frozen=True)
class SnapshotHeader:
    nx: int
    ny: int
    dx: float
    dy: float

    def matches(self, grid: Grid) -> bool:
        return (self.nx == grid.nx and self.ny == grid.ny
                and abs(self.dx - grid.dx) <= 1e-12 * grid.dx
                and abs(self.dy - grid.dy) <= 1e-12 * grid.dy)


def encode_snapshot(grid: Grid, state) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, grid.nx, grid.ny, grid.dx, grid.dy, float(state.t), int(state.step))
    parts = [head]
    for a, shape in ((state.n, grid.shape), (state.c, grid.shape),
                     (state.u.u, (grid.ny, grid.nx + 1)), (state.u.v, (grid.ny + 1, grid.nx))):
        if a.shape != shape:
            raise InvalidParameter(f"field of shape {a.shape} does not match grid {shape}")
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_snapshot(data: bytes):
    """Return ``(SimState, SnapshotHeader)``; raises on any size or magic mismatch."""
    from .coupler import SimState

    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"snapshot truncated: {len(data)} bytes")
    magic, version, nx, ny, dx, dy, t, step = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"snapshot version {version} is not supported")
    counts = [nx * ny, nx * ny, (nx + 1) * ny, nx * (ny + 1)]
    expected = _HEADER.size + 8 * sum(counts)
    if len(data) != expected:
        raise SnapshotFormatError(f"snapshot length {len(data)} != expected {expected}")
    arrays = []
    off = _HEADER.size
    for cnt in counts:
        arrays.append(np.frombuffer(data, dtype="<f8", count=cnt, offset=off).astype(np.float64))
        off += 8 * cnt
    n = arrays[0].reshape(ny, nx)
    c = arrays[1].reshape(ny, nx)
    u = Faces(arrays[2].reshape(ny, nx + 1), arrays[3].reshape(ny + 1, nx))
    return SimState(t, step, n, c, u), SnapshotHeader(nx, ny, dx, dy)


def write_snapshot(path, grid: Grid, state) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_snapshot(grid, state))


def read_snapshot(path):
    with open(path, "rb") as fh:
        return decode_snapshot(fh.read())


# -- diagnostics CSV ------------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % x


def write_diagnostics_csv(path, records) -> None:
    from .diagnostics import DiagRecord

    names = [f.name for f in dataclasses.fields(DiagRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in records:
            w.writerow([_fmt(getattr(r, k)) for k in names])


def read_diagnostics_csv(path):
    from .diagnostics import DiagRecord

    names = [f.name for f in dataclasses.fields(DiagRecord)]
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != names:
        raise InvalidParameter("diagnostics header does not match DiagRecord fields")
    return [DiagRecord(**{k: float(v) for k, v in zip(names, row)}) for row in rows[1:]]


# -- images ---------------------------------------------------------------------

def pgm_bytes(field, vrange=None) -> bytes:
    """16-bit binary PGM; row 0 of the image is the top of the domain."""
    a = np.asarray(field, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidParameter("cannot image a field containing NaN or inf")
    lo, hi = (float(a.min()), float(a.max())) if vrange is None else map(float, vrange)
    if hi > lo:
        scaled = np.clip((a - lo) / (hi - lo), 0.0, 1.0) * 65535.0
        pix = np.rint(scaled).astype(">u2")
    else:
        pix = np.full(a.shape, 32768, dtype=">u2")
    pix = pix[::-1]
    h, w = pix.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + pix.tobytes()


def write_pgm(path, field, vrange=None) -> None:
    data = pgm_bytes(field, vrange)
    with open(path, "wb") as fh:
        fh.write(data)
