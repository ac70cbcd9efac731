"""Binary field snapshots and plain-text slice export.

Layout (little-endian), 32-byte header then Q^d float64 grid values with x
varying fastest:

    offset  size  content
    0       4     b"PFK1"
    4       4     int32 dim
    8       4     int32 M (modes per direction; Q = 2M)
    12      8     int64 step
    20      8     float64 time
    28      4     zero padding
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quadrature import SpectralBasis1D
from .tensor import Field, contract, from_grid, to_grid

__all__ = ["MAGIC", "SnapshotHeader", "write_snapshot", "read_snapshot", "load_field", "write_slices_csv"]

MAGIC = b"PFK1"
_HEADER = struct.Struct("<4siiqd4x")
assert _HEADER.size == 32


@dataclass(frozen=True)
class SnapshotHeader:
    dim: int
    M: int
    step: int
    time: float


def write_snapshot(path, phi: Field, basis: SpectralBasis1D, step: int, time: float) -> Path:
    path = Path(path)
    grid = to_grid(phi, basis)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, phi.ndim, basis.M, int(step), float(time)))
        # axes are (x, y[, z]); reversing them makes x the fastest index
        fh.write(np.ascontiguousarray(grid.T, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[SnapshotHeader, np.ndarray]:
    """Return the header and grid values with axes (x, y[, z])."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, dim, M, step, time = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if dim not in (2, 3) or M < 2:
        raise ValueError(f"{path}: bad header dim={dim} M={M}")
    Q = 2 * M
    n = Q**dim
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != n:
        raise ValueError(f"{path}: expected {n} values, found {body.size}")
    grid = body.reshape((Q,) * dim).T.astype(float)
    return SnapshotHeader(dim, M, step, time), grid


def load_field(path, basis: SpectralBasis1D) -> tuple[SnapshotHeader, Field]:
    header, grid = read_snapshot(path)
    if header.M != basis.M:
        raise ValueError(f"{path}: snapshot has M={header.M}, basis has M={basis.M}")
    return header, from_grid(grid, basis)


def write_slices_csv(path, phi: Field, basis: SpectralBasis1D) -> Path:
    """Export the coordinate planes through the origin.

    3-D fields give the z=0, y=0 and x=0 planes sampled on the Gauss nodes
    of the two remaining directions; 2-D fields give the whole grid as the
    z=0 plane. Columns: plane,u,v,value.
    """
    path = Path(path)
    nodes = basis.quad.nodes
    at_zero = basis.evaluate(np.eye(basis.M), [0.0])[:, 0]  # phi_k(0)
    B = basis.basis_at_nodes.T
    planes = []
    if phi.ndim == 2:
        planes.append(("z=0", to_grid(phi, basis)))
    else:
        # contract the sliced axis with phi_k(0), the other two with nodal tables
        for name, axis in (("z=0", 2), ("y=0", 1), ("x=0", 0)):
            mats = [B, B, B]
            mats[axis] = at_zero[None, :]
            vals = contract(phi, mats)
            planes.append((name, np.squeeze(vals, axis=axis)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["plane", "u", "v", "value"])
        for name, vals in planes:
            for i, u in enumerate(nodes):
                for j, v in enumerate(nodes):
                    w.writerow([name, f"{u:.17g}", f"{v:.17g}", f"{vals[i, j]:.17g}"])
    return path
