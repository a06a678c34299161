"""Serialization: framed binary arrays with a fixed 64-byte header, CSV
tables at full round-trip precision, and the replayable run manifest.

The binary layout (little-endian) is the contract consumed by the plotting
frontend and any external tool:

    offset  size  field
    0       8     magic  b"CESSIMF1"
    8       4     u32    header size (always 64)
    12      4     u32    dtype code: 1 = float64, 2 = complex128
    16      4     u32    n_rows (time index)
    20      4     u32    n_cols (space index)
    24      8     f64    t0     (time of first row)
    32      8     f64    dt     (row spacing)
    40      8     f64    x0     (coordinate of first column)
    48      8     f64    dx     (column spacing)
    56      8     pad
    64      --    row-major array data
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path

import numpy as np

MAGIC = b"CESSIMF1"
HEADER_SIZE = 64
DTYPE_CODES = {1: np.float64, 2: np.complex128}


class FrameFormatError(ValueError):
    pass


def write_frames(path, frames: np.ndarray, t0: float, dt: float, x0: float, dx: float):
    frames = np.ascontiguousarray(frames)
    if frames.ndim != 2:
        raise FrameFormatError("frames must be 2D (time, space)")
    if frames.dtype == np.float64:
        code = 1
    elif frames.dtype == np.complex128:
        code = 2
    else:
        raise FrameFormatError(f"unsupported dtype {frames.dtype}")
    header = MAGIC + struct.pack(
        "<IIIIdddd", HEADER_SIZE, code, frames.shape[0], frames.shape[1], t0, dt, x0, dx
    )
    header = header.ljust(HEADER_SIZE, b"\0")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frames.tobytes(order="C"))


def read_frames(path):
    with open(path, "rb") as fh:
        header = fh.read(HEADER_SIZE)
        if len(header) < HEADER_SIZE or header[:8] != MAGIC:
            raise FrameFormatError(f"{path}: bad magic (offset 0)")
        hsize, code, n_rows, n_cols, t0, dt, x0, dx = struct.unpack(
            "<IIIIdddd", header[8:56]
        )
        if hsize != HEADER_SIZE:
            raise FrameFormatError(f"{path}: header size field {hsize} != {HEADER_SIZE}")
        if code not in DTYPE_CODES:
            raise FrameFormatError(f"{path}: unknown dtype code {code} (offset 12)")
        data = np.frombuffer(fh.read(), dtype=DTYPE_CODES[code])
    if data.size != n_rows * n_cols:
        raise FrameFormatError(
            f"{path}: payload has {data.size} values, header promises {n_rows}x{n_cols}"
        )
    return {
        "frames": data.reshape(n_rows, n_cols),
        "t0": t0,
        "dt": dt,
        "x0": x0,
        "dx": dx,
        "times": t0 + dt * np.arange(n_rows),
        "x": x0 + dx * np.arange(n_cols),
    }


def format_float(x) -> str:
    """Shortest decimal that round-trips a float64."""
    return repr(float(x))


def write_csv(path, columns: list, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [
                cell if isinstance(cell, str) else format_float(cell) for cell in row
            ]
            fh.write(",".join(cells) + "\n")


def read_csv(path) -> tuple[list, list]:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    return header, rows


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class ManifestWriter:
    """Collects the resolved configuration, seeds, and output inventory."""

    def __init__(self, config_echo: dict, master_seed: int, version: str):
        self.data = {
            "format": "cessim-manifest-1",
            "version": version,
            "master_seed": master_seed,
            "config": dict(sorted(config_echo.items())),
            "task_seeds": {},
            "outputs": {},
            "counters": {},
        }
        self._t0 = time.monotonic()

    def record_seed(self, task: str, seed, stream: int):
        self.data["task_seeds"][task] = {"seed": int(seed), "stream": int(stream)}

    def record_counter(self, name: str, value):
        self.data["counters"][name] = value

    def record_output(self, path):
        p = Path(path)
        self.data["outputs"][p.name] = {
            "bytes": p.stat().st_size,
            "sha256": sha256_of(p),
        }

    def write(self, path):
        self.data["wall_seconds"] = round(time.monotonic() - self._t0, 3)
        with open(path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")
