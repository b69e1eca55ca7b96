"""Occupancy scenes: glyph-file loading and seeded procedural room layouts.

A scene is a rectangular cell grid at a fixed metric resolution. Each cell is
free space, an obstacle, or exterior (outside the building shell; unexplorable
and excluded from area accounting). World coordinates are metres with cell
(row, col) spanning [col*res, (col+1)*res) x [row*res, (row+1)*res).

File format::

    resolution_m=0.05
    spawn=1,1,8,8          # optional: col0,row0,col1,row1 inclusive
    XXXXXXXXXX
    X........X
    XXXXXXXXXX

Glyphs: '.' free, '#' obstacle, 'X' exterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

FREE = 0
OBSTACLE = 1
EXTERIOR = 2

_GLYPHS = {".": FREE, "#": OBSTACLE, "X": EXTERIOR}
_GLYPHS_INV = {v: k for k, v in _GLYPHS.items()}

DEFAULT_RESOLUTION = 0.05

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


class ParseError(Exception):
    """Scene file is malformed (bad header, ragged rows, unknown glyph)."""


class DisconnectedScene(Exception):
    """Free space is not a single 4-connected component."""


class EmptySpawn(Exception):
    """The spawn region contains no free cell."""


class GenerationFailed(Exception):
    """The procedural generator exhausted its retries for a seed."""


@dataclass(eq=False)
class Scene:
    """Immutable-by-convention world grid plus its spawn mask."""

    cells: np.ndarray           # (H, W) int8 of FREE/OBSTACLE/EXTERIOR
    resolution: float
    spawn_mask: np.ndarray      # (H, W) bool, subset of free cells
    name: str = "scene"

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def free_mask(self) -> np.ndarray:
        return self.cells == FREE

    def validate(self) -> None:
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise ParseError("scene grid must be a non-empty 2-d array")
        free = self.free_mask
        n_free = int(free.sum())
        if n_free == 0:
            raise EmptySpawn(f"{self.name}: no free cells")
        _, n_components = ndimage.label(free, structure=_FOUR_CONNECTED)
        if n_components != 1:
            raise DisconnectedScene(
                f"{self.name}: free space splits into {n_components} components"
            )
        if not self.spawn_mask.any():
            raise EmptySpawn(f"{self.name}: spawn region holds no free cell")
        if (self.spawn_mask & ~free).any():
            raise EmptySpawn(f"{self.name}: spawn region leaves free space")


def explorable_area(scene: Scene) -> float:
    """Total reachable floor area in square metres (free cells only)."""
    return float(scene.free_mask.sum()) * scene.resolution**2


def load_scene(path, name: str | None = None) -> Scene:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines or not lines[0].startswith("resolution_m="):
        raise ParseError(f"{path}: first line must be resolution_m=<float>")
    try:
        resolution = float(lines[0].split("=", 1)[1])
    except ValueError as exc:
        raise ParseError(f"{path}: bad resolution: {lines[0]}") from exc
    if resolution <= 0:
        raise ParseError(f"{path}: resolution must be positive")

    rows_at = 1
    spawn_rect = None
    if len(lines) > 1 and lines[1].startswith("spawn="):
        parts = lines[1].split("=", 1)[1].split(",")
        if len(parts) != 4:
            raise ParseError(f"{path}: spawn needs x0,y0,x1,y1")
        try:
            spawn_rect = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ParseError(f"{path}: bad spawn rect: {lines[1]}") from exc
        rows_at = 2

    glyph_rows = lines[rows_at:]
    if not glyph_rows:
        raise ParseError(f"{path}: no grid rows")
    width = len(glyph_rows[0])
    grid = np.empty((len(glyph_rows), width), dtype=np.int8)
    for r, row in enumerate(glyph_rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {r} has length {len(row)}, expected {width}")
        for c, ch in enumerate(row):
            try:
                grid[r, c] = _GLYPHS[ch]
            except KeyError:
                raise ParseError(f"{path}: unknown glyph {ch!r} at row {r} col {c}") from None

    spawn = grid == FREE
    if spawn_rect is not None:
        x0, y0, x1, y1 = spawn_rect
        box = np.zeros_like(spawn)
        box[max(y0, 0) : y1 + 1, max(x0, 0) : x1 + 1] = True
        spawn &= box

    scene = Scene(grid, resolution, spawn, name=name or str(path))
    scene.validate()
    return scene


def scene_to_text(scene: Scene) -> str:
    """Inverse of load_scene's grid section, for debugging and round trips."""
    body = "\n".join(
        "".join(_GLYPHS_INV[int(v)] for v in row) for row in scene.cells
    )
    return f"resolution_m={scene.resolution}\n{body}\n"


# ---------------------------------------------------------------------------
# Procedural generator: axis-aligned rooms joined by straight corridors.
# ---------------------------------------------------------------------------

MIN_SIDE = 40
MAX_SIDE = 200
MIN_ROOMS = 2
MAX_ROOMS = 12
CORRIDOR_WIDTH = 12      # 0.6 m at default resolution, roomy for a 0.25 m stride


@dataclass
class GeneratorParams:
    rooms: tuple[int, int] = (3, 7)          # inclusive count range
    side: tuple[int, int] = (120, 200)       # inclusive cells-per-side range
    room_side: tuple[int, int] = (28, 64)    # 1.4 .. 3.2 m rooms
    max_attempts: int = 25
    resolution: float = DEFAULT_RESOLUTION


def _carve_corridor(grid: np.ndarray, a: tuple[int, int], b: tuple[int, int]) -> None:
    # L-shaped: horizontal leg at a's row, then vertical leg at b's column.
    half = CORRIDOR_WIDTH // 2
    r0, c0 = a
    r1, c1 = b
    h, w = grid.shape

    def clamp_r(lo, hi):
        return max(2, lo), min(h - 2, hi)

    def clamp_c(lo, hi):
        return max(2, lo), min(w - 2, hi)

    lo, hi = clamp_r(r0 - half, r0 + half + 1)
    clo, chi = clamp_c(min(c0, c1) - half, max(c0, c1) + half + 1)
    grid[lo:hi, clo:chi] = FREE
    lo, hi = clamp_r(min(r0, r1) - half, max(r0, r1) + half + 1)
    clo, chi = clamp_c(c1 - half, c1 + half + 1)
    grid[lo:hi, clo:chi] = FREE


def generate_scene(seed: int, params: GeneratorParams | None = None) -> Scene:
    """Deterministic-in-seed room-and-corridor scene.

    Raises GenerationFailed after bounded retries (all retries reuse streams
    drawn from the same seeded generator, so failure is reproducible too).
    """
    p = params or GeneratorParams()
    if not (MIN_ROOMS <= p.rooms[0] <= p.rooms[1] <= MAX_ROOMS):
        raise ValueError(f"room count range {p.rooms} outside [{MIN_ROOMS}, {MAX_ROOMS}]")
    if not (MIN_SIDE <= p.side[0] <= p.side[1] <= MAX_SIDE):
        raise ValueError(f"side range {p.side} outside [{MIN_SIDE}, {MAX_SIDE}]")

    rng = np.random.default_rng(seed)
    for _ in range(p.max_attempts):
        h = int(rng.integers(p.side[0], p.side[1] + 1))
        w = int(rng.integers(p.side[0], p.side[1] + 1))
        n_rooms = int(rng.integers(p.rooms[0], p.rooms[1] + 1))
        grid = np.full((h, w), EXTERIOR, dtype=np.int8)

        centers = []
        for _ in range(n_rooms):
            rh = int(rng.integers(p.room_side[0], min(p.room_side[1], h - 6) + 1))
            rw = int(rng.integers(p.room_side[0], min(p.room_side[1], w - 6) + 1))
            r = int(rng.integers(2, h - rh - 2))
            c = int(rng.integers(2, w - rw - 2))
            grid[r : r + rh, c : c + rw] = FREE
            centers.append((r + rh // 2, c + rw // 2))

        order = rng.permutation(len(centers))
        for i in range(len(order) - 1):
            _carve_corridor(grid, centers[order[i]], centers[order[i + 1]])

        free = grid == FREE
        shell = ndimage.binary_dilation(free, structure=np.ones((3, 3), bool)) & ~free
        grid[shell] = OBSTACLE

        scene = Scene(grid, p.resolution, free.copy(), name=f"gen-{seed}")
        try:
            scene.validate()
        except (DisconnectedScene, EmptySpawn):
            continue
        return scene
    raise GenerationFailed(f"seed {seed}: no valid layout in {p.max_attempts} attempts")
