"""Shared grid/geometry conventions.

World frame: metres, x along columns, y along rows, angles in radians
counter-clockwise from +x. Cell (r, c) covers [c*res, (c+1)*res) x
[r*res, (r+1)*res); all grids anchor their integer cell lattice at the world
origin so maps from different agents align exactly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def wrap_to_pi(angle):
    """Wrap to (-pi, pi]; +pi stays +pi so a dead-astern target turns left."""
    wrapped = -((-angle + np.pi) % (2.0 * np.pi) - np.pi)
    return wrapped


def world_to_cell(x, y, resolution: float):
    """Global lattice cell (row, col) containing a world point."""
    return int(np.floor(y / resolution)), int(np.floor(x / resolution))


def cell_center(row: int, col: int, resolution: float) -> tuple[float, float]:
    return (col + 0.5) * resolution, (row + 0.5) * resolution


@lru_cache(maxsize=32)
def disk_offsets(radius_cells: int) -> np.ndarray:
    """Lattice disk: integer offsets with dr^2 + dc^2 <= radius^2, row-major."""
    r = int(radius_cells)
    span = np.arange(-r, r + 1)
    dr, dc = np.meshgrid(span, span, indexing="ij")
    keep = dr * dr + dc * dc <= r * r
    return np.stack([dr[keep], dc[keep]], axis=1)
