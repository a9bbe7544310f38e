"""CSV and binary artifact writers with provenance headers.

Every CSV starts with a single ``#`` comment line naming the tool, the
subcommand, the seed, and the config hash, followed by a header row. Floats
are rendered with ``repr`` (shortest round-trip form), so outputs are
byte-stable for a fixed seed. The binary dump format for complex matrices is
a 24-byte header (magic ``RISC``, uint32 version, uint64 rows, uint64 cols,
little-endian) followed by row-major interleaved float64 re/im pairs.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RISC"
VERSION = 1


def format_value(value) -> str:
    """Stable scalar rendering: repr for floats, str otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: list[str], rows: list[list], provenance: dict) -> Path:
    """Write rows with a provenance comment line and a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tags = " ".join(f"{k}={v}" for k, v in provenance.items())
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# {tags}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Read a CSV written by :func:`write_csv`; values stay as strings."""
    with open(path, "r", encoding="utf-8") as handle:
        comment = handle.readline().strip()
        provenance = {}
        if comment.startswith("#"):
            for token in comment[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    provenance[key] = value
        reader = csv.reader(handle)
        header = next(reader)
        rows = [row for row in reader]
    return provenance, header, rows


def dump_complex_matrix(path: str | Path, matrix: np.ndarray) -> Path:
    """Binary dump: header then row-major little-endian interleaved re/im."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mat = np.atleast_2d(np.asarray(matrix, dtype=complex))
    interleaved = np.empty(mat.shape + (2,), dtype="<f8")
    interleaved[..., 0] = mat.real
    interleaved[..., 1] = mat.imag
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", VERSION))
        handle.write(struct.pack("<QQ", mat.shape[0], mat.shape[1]))
        handle.write(interleaved.tobytes(order="C"))
    return path


def load_complex_matrix(path: str | Path) -> np.ndarray:
    """Read back a matrix written by :func:`dump_complex_matrix`."""
    with open(path, "rb") as handle:
        if handle.read(4) != MAGIC:
            raise ValueError(f"{path}: not a complex-matrix dump")
        (version,) = struct.unpack("<I", handle.read(4))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported dump version {version}")
        rows, cols = struct.unpack("<QQ", handle.read(16))
        data = np.frombuffer(handle.read(), dtype="<f8").reshape(rows, cols, 2)
    return data[..., 0] + 1j * data[..., 1]
