"""Per-agent occupancy maps and team-level map fusion.

An OccGrid holds two [0, 1] channels, explored and obstacle, on a world-
anchored lattice (origin_cell counts whole cells from the world origin, so any
two grids align exactly cell-for-cell). Grids auto-grow as scans arrive.
Fusion is a two stage pipeline: refine_map re-crops a grid onto a common frame
and merge_maps takes the per-cell, per-channel maximum, which is associative,
commutative and idempotent, so merge order never matters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulator import HIT_OBSTACLE, LocalScan, Pose


class FrameMismatch(Exception):
    """Maps passed to merge_maps do not share origin/resolution/shape."""


class EmptyMap(Exception):
    """refine_map got a fully unexplored grid and nothing to anchor a crop."""


@dataclass
class OccGrid:
    explored: np.ndarray        # (H, W) float64 in [0, 1]
    obstacle: np.ndarray        # (H, W) float64 in [0, 1]
    origin_cell: tuple[int, int]   # world lattice cell of array index (0, 0)
    resolution: float

    @classmethod
    def empty(cls, resolution: float, origin_cell=(0, 0), shape=(1, 1)) -> "OccGrid":
        return cls(
            explored=np.zeros(shape),
            obstacle=np.zeros(shape),
            origin_cell=(int(origin_cell[0]), int(origin_cell[1])),
            resolution=resolution,
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.explored.shape

    def copy(self) -> "OccGrid":
        return OccGrid(self.explored.copy(), self.obstacle.copy(), self.origin_cell, self.resolution)

    def world_to_index(self, x: float, y: float) -> tuple[int, int]:
        """Array index of the world point (may fall outside the arrays)."""
        r = int(np.floor(y / self.resolution)) - self.origin_cell[0]
        c = int(np.floor(x / self.resolution)) - self.origin_cell[1]
        return r, c

    def index_to_world(self, r: int, c: int) -> tuple[float, float]:
        gr = r + self.origin_cell[0]
        gc = c + self.origin_cell[1]
        return (gc + 0.5) * self.resolution, (gr + 0.5) * self.resolution

    def grow_to(self, rmin: int, rmax: int, cmin: int, cmax: int) -> None:
        """Expand arrays so global cells [rmin..rmax] x [cmin..cmax] fit."""
        h, w = self.shape
        r0, c0 = self.origin_cell
        pad_top = max(0, r0 - rmin)
        pad_left = max(0, c0 - cmin)
        pad_bottom = max(0, rmax - (r0 + h - 1))
        pad_right = max(0, cmax - (c0 + w - 1))
        if pad_top or pad_left or pad_bottom or pad_right:
            widths = ((pad_top, pad_bottom), (pad_left, pad_right))
            self.explored = np.pad(self.explored, widths)
            self.obstacle = np.pad(self.obstacle, widths)
            self.origin_cell = (r0 - pad_top, c0 - pad_left)


def _ray_cells(pose: Pose, scan: LocalScan, resolution: float):
    """Global cells swept by each ray replayed in the given pose's frame.

    Returns (free_rows, free_cols, obst_rows, obst_cols): cells strictly before
    each ray's endpoint, plus the terminal cell of obstacle rays.
    """
    step = resolution * 0.5
    abs_bearings = pose.theta + scan.bearings
    max_n = int(np.ceil(scan.ranges.max() / step))
    ts = np.arange(0, max_n + 1) * step
    valid = ts[None, :] < scan.ranges[:, None]

    xs = pose.x + np.cos(abs_bearings)[:, None] * ts[None, :]
    ys = pose.y + np.sin(abs_bearings)[:, None] * ts[None, :]
    rows = np.floor(ys / resolution).astype(np.int64)
    cols = np.floor(xs / resolution).astype(np.int64)

    free_rows = rows[valid]
    free_cols = cols[valid]

    hit = scan.hits == HIT_OBSTACLE
    ex = pose.x + np.cos(abs_bearings[hit]) * scan.ranges[hit]
    ey = pose.y + np.sin(abs_bearings[hit]) * scan.ranges[hit]
    obst_rows = np.floor(ey / resolution).astype(np.int64)
    obst_cols = np.floor(ex / resolution).astype(np.int64)
    return free_rows, free_cols, obst_rows, obst_cols


def integrate_scan(grid: OccGrid, scan: LocalScan, est_pose: Pose) -> np.ndarray:
    """Mark every swept cell explored and obstacle-ray endpoints as obstacles.

    Rays are replayed from the estimated pose (bearings are heading-relative).
    Marks are idempotent saturations to 1.0, so re-integrating a scan is a
    no-op. Returns the global cells newly marked explored, (M, 2) int.
    """
    fr, fc, orr, oc = _ray_cells(est_pose, scan, grid.resolution)
    all_r = np.concatenate([fr, orr])
    all_c = np.concatenate([fc, oc])
    if all_r.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    grid.grow_to(all_r.min(), all_r.max(), all_c.min(), all_c.max())

    r0, c0 = grid.origin_cell
    lr = all_r - r0
    lc = all_c - c0
    flat = lr * grid.shape[1] + lc
    flat = np.unique(flat)
    exp = grid.explored.reshape(-1)
    fresh = flat[exp[flat] < 1.0]
    exp[fresh] = 1.0
    grid.obstacle[orr - r0, oc - c0] = 1.0

    out = np.empty((fresh.size, 2), dtype=np.int64)
    out[:, 0] = fresh // grid.shape[1] + r0
    out[:, 1] = fresh % grid.shape[1] + c0
    return out


def refine_map(
    grid: OccGrid,
    birth_poses,
    bounds: tuple[int, int, int, int] | None = None,
    margin: int = 5,
) -> OccGrid:
    """Re-express a grid on the team frame and crop it.

    The crop box is the tight bounding box of the union of (a) the known
    explorable extent `bounds` (inclusive global-cell box, e.g. the scene
    rectangle) when given, (b) all explored cells, and (c) the team's birth
    cells, padded by `margin` cells. Passing the same bounds for every agent
    yields identical frames, ready for merge_maps.
    """
    res = grid.resolution
    boxes = []
    if bounds is not None:
        boxes.append(bounds)
    rr, cc = np.nonzero(grid.explored >= 0.5)
    if rr.size:
        r0g, c0g = grid.origin_cell
        boxes.append((rr.min() + r0g, cc.min() + c0g, rr.max() + r0g, cc.max() + c0g))
    for p in birth_poses:
        r, c = p.cell(res)
        boxes.append((r, c, r, c))
    if not boxes:
        raise EmptyMap("nothing explored and no bounds or birth poses to crop to")

    rmin = min(b[0] for b in boxes) - margin
    cmin = min(b[1] for b in boxes) - margin
    rmax = max(b[2] for b in boxes) + margin
    cmax = max(b[3] for b in boxes) + margin

    h = rmax - rmin + 1
    w = cmax - cmin + 1
    out = OccGrid.empty(res, origin_cell=(rmin, cmin), shape=(h, w))

    # Overlap between the source arrays and the crop window.
    sr0, sc0 = grid.origin_cell
    src_h, src_w = grid.shape
    lo_r = max(rmin, sr0)
    lo_c = max(cmin, sc0)
    hi_r = min(rmax, sr0 + src_h - 1)
    hi_c = min(cmax, sc0 + src_w - 1)
    if lo_r <= hi_r and lo_c <= hi_c:
        out.explored[lo_r - rmin : hi_r - rmin + 1, lo_c - cmin : hi_c - cmin + 1] = (
            grid.explored[lo_r - sr0 : hi_r - sr0 + 1, lo_c - sc0 : hi_c - sc0 + 1]
        )
        out.obstacle[lo_r - rmin : hi_r - rmin + 1, lo_c - cmin : hi_c - cmin + 1] = (
            grid.obstacle[lo_r - sr0 : hi_r - sr0 + 1, lo_c - sc0 : hi_c - sc0 + 1]
        )
    return out


def merge_maps(maps) -> OccGrid:
    """Per-cell, per-channel maximum of aligned grids."""
    maps = list(maps)
    if not maps:
        raise FrameMismatch("merge_maps needs at least one map")
    first = maps[0]
    for m in maps[1:]:
        if (
            m.origin_cell != first.origin_cell
            or m.shape != first.shape
            or m.resolution != first.resolution
        ):
            raise FrameMismatch(
                f"frame {m.origin_cell}/{m.shape} vs {first.origin_cell}/{first.shape}"
            )
    out = first.copy()
    for m in maps[1:]:
        np.maximum(out.explored, m.explored, out=out.explored)
        np.maximum(out.obstacle, m.obstacle, out=out.obstacle)
    return out


# ---------------------------------------------------------------------------
# Debug dumps
# ---------------------------------------------------------------------------


def save_pgm(grid: OccGrid, base_path: str) -> tuple[str, str]:
    """Write `<base>_explored.pgm` and `<base>_obstacle.pgm` (binary P5).

    Row-major, one byte per cell, 255 == channel value 1.0.
    """
    paths = []
    for name, chan in (("explored", grid.explored), ("obstacle", grid.obstacle)):
        path = f"{base_path}_{name}.pgm"
        data = np.clip(np.rint(chan * 255.0), 0, 255).astype(np.uint8)
        h, w = data.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(data.tobytes())
        paths.append(path)
    return tuple(paths)


def load_pgm(path: str) -> np.ndarray:
    """Read a binary P5 file back into a float array in [0, 1]."""
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        data = np.frombuffer(fh.read(w * h), dtype=np.uint8).reshape(h, w)
    return data.astype(np.float64) / maxval
