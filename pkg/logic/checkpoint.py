"""
Binary checkpoint files.

Layout, little-endian throughout:

    magic    4s   b"WFPS"
    version  u4
    nq, np   u4 u4
    q_min q_max p_min p_max time hbar D   7 x f8
    values   nq * np complex128 (interleaved re, im), row-major over q
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from logic.grid import POSITION_MOMENTUM, Field, GridError, PhaseSpaceGrid, make_grid

log = logging.getLogger(__name__)

MAGIC = b"WFPS"
VERSION = 1
HEADER = struct.Struct("<4sIII7d")
DTYPE = np.dtype("<c16")


class CheckpointFormatError(ValueError):
    """Bad magic or version, truncated payload, or a grid that does not match."""


def file_size(n_q: int, n_p: int) -> int:
    return HEADER.size + DTYPE.itemsize * n_q * n_p


def write_field(field: Field, path: Union[str, Path], hbar: float, D: float) -> Path:
    field._require(POSITION_MOMENTUM)
    g = field.grid
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = HEADER.pack(MAGIC, VERSION, g.n_q, g.n_p,
                         g.q_min, g.q_max, g.p_min, g.p_max,
                         float(field.time), float(hbar), float(D))
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(field.values, dtype=DTYPE).tobytes())
    log.debug("checkpoint written", extra={"path": str(path), "time": field.time})
    return path


def read_header(blob: bytes) -> Tuple[PhaseSpaceGrid, float, float, float]:
    """Returns (grid, time, hbar, D)."""
    if len(blob) < HEADER.size:
        raise CheckpointFormatError(f"truncated header: {len(blob)} < {HEADER.size} bytes")
    magic, version, n_q, n_p, q_min, q_max, p_min, p_max, time, hbar, D = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported format version {version}")
    try:
        grid = make_grid(n_q, n_p, (q_min, q_max), (p_min, p_max))
    except GridError as err:
        raise CheckpointFormatError(f"invalid grid in header: {err}") from err
    return grid, time, hbar, D


def read_field(path: Union[str, Path], expect_grid: Optional[PhaseSpaceGrid] = None):
    """
    Returns (field, hbar, D). With `expect_grid` the stored grid must match
    it exactly.
    """
    blob = Path(path).read_bytes()
    grid, time, hbar, D = read_header(blob)
    expected = file_size(grid.n_q, grid.n_p)
    if len(blob) != expected:
        raise CheckpointFormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    if expect_grid is not None:
        try:
            expect_grid.check_same(grid)
        except GridError as err:
            raise CheckpointFormatError(f"{path}: grid mismatch: {err}") from err
    values = np.frombuffer(blob, dtype=DTYPE, offset=HEADER.size).reshape(grid.n_q, grid.n_p)
    field = Field(grid, values.astype(np.complex128), time)
    return field, hbar, D
