"""Tile binning: touched-tile counting, prefix sum, key duplication, sorting.

Stages 2-5 of the pipeline. Every surviving Gaussian reserves one entry per
screen tile its footprint rectangle overlaps; entries are keyed by
``(tile_index << 32) | depth_bits`` so a single stable sort groups them by
tile and orders them front-to-back within each tile, with equal
(tile, depth) pairs resolved by ascending Gaussian index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, InternalError
from .projection import Projection

TILE_SIZE = 16

_INT64_MAX = np.iinfo(np.int64).max


@dataclass(frozen=True)
class TileGrid:
    """Screen decomposition into 16x16-pixel tiles (edge tiles may be partial)."""

    width: int
    height: int
    tile_size: int = TILE_SIZE

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.tiles_x * self.tiles_y >= 2 ** 32:
            raise CapacityError("tile count does not fit the 32-bit key field")

    @property
    def tiles_x(self) -> int:
        return -(-self.width // self.tile_size)

    @property
    def tiles_y(self) -> int:
        return -(-self.height // self.tile_size)

    @property
    def n_tiles(self) -> int:
        return self.tiles_x * self.tiles_y


@dataclass(frozen=True)
class TileRect:
    """Half-open tile-coordinate rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def count(self) -> int:
        return max(0, self.x1 - self.x0) * max(0, self.y1 - self.y0)


@dataclass(eq=False)
class TilePairList:
    """Sorted (key, Gaussian-index) pairs plus per-tile index ranges."""

    keys: np.ndarray               # (P,) uint64, ascending
    gaussian_indices: np.ndarray   # (P,) int64, parallel to keys
    tile_ranges: np.ndarray | None = None  # (n_tiles, 2) half-open spans

    def __len__(self) -> int:
        return len(self.keys)


def _tile_rects(mean2d: np.ndarray, ext_x: np.ndarray, ext_y: np.ndarray,
                valid: np.ndarray, grid: TileGrid):
    """Vectorized footprint-to-tile-rectangle mapping, clipped to the grid.

    The pixel interval [mean - ext, mean + ext] (mean promoted to float64,
    which is exact for float32 inputs) is intersected with the half-open
    16-pixel tile spans.
    """
    ts = grid.tile_size
    mx = mean2d[:, 0].astype(np.float64)
    my = mean2d[:, 1].astype(np.float64)
    ex = ext_x.astype(np.float64)
    ey = ext_y.astype(np.float64)
    x0 = np.clip(np.floor((mx - ex) / ts), 0, grid.tiles_x).astype(np.int64)
    x1 = np.clip(np.floor((mx + ex) / ts) + 1, 0, grid.tiles_x).astype(np.int64)
    y0 = np.clip(np.floor((my - ey) / ts), 0, grid.tiles_y).astype(np.int64)
    y1 = np.clip(np.floor((my + ey) / ts) + 1, 0, grid.tiles_y).astype(np.int64)
    x1 = np.maximum(x1, x0)
    y1 = np.maximum(y1, y0)
    empty = ~valid
    x1 = np.where(empty, x0, x1)
    y1 = np.where(empty, y0, y1)
    return x0, x1, y0, y1


def tiles_touched(pg, grid: TileGrid) -> TileRect:
    """Tile rectangle overlapped by one projected Gaussian's footprint."""
    mean2d = np.asarray(pg.mean2d, dtype=np.float64).reshape(1, 2)
    ex = np.array([pg.extent.rx], dtype=np.int64)
    ey = np.array([pg.extent.ry], dtype=np.int64)
    x0, x1, y0, y1 = _tile_rects(mean2d, ex, ey, np.array([True]), grid)
    return TileRect(x0=int(x0[0]), y0=int(y0[0]), x1=int(x1[0]), y1=int(y1[0]))


def touched_counts(proj: Projection, grid: TileGrid) -> np.ndarray:
    """Per-Gaussian touched-tile counts (0 for culled or off-screen)."""
    x0, x1, y0, y1 = _tile_rects(proj.mean2d, proj.ext_x, proj.ext_y, proj.valid, grid)
    return (x1 - x0) * (y1 - y0)


def inclusive_sum(counts) -> np.ndarray:
    """Inclusive prefix sum; offsets[i] = sum(counts[:i + 1])."""
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and int(sum(int(c) for c in counts)) > _INT64_MAX:
        raise CapacityError("pair count overflows the 64-bit index type")
    return np.cumsum(counts, dtype=np.int64)


def duplicate_with_keys(proj: Projection, offsets: np.ndarray,
                        grid: TileGrid) -> tuple[np.ndarray, np.ndarray]:
    """Emit one (key, gaussian index) entry per touched tile.

    Entries for Gaussian g occupy the offset range reserved by the prefix
    sum, ordered row-major over its tile rectangle; keys combine the tile
    index (high 32 bits) with the monotone unsigned reinterpretation of the
    float32 view-space depth (low 32 bits).
    """
    x0, x1, y0, y1 = _tile_rects(proj.mean2d, proj.ext_x, proj.ext_y, proj.valid, grid)
    counts = (x1 - x0) * (y1 - y0)
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.shape != counts.shape:
        raise InternalError("offsets do not match the projection")
    total = int(offsets[-1]) if len(offsets) else 0

    keys = np.empty(total, dtype=np.uint64)
    gidx = np.empty(total, dtype=np.int64)
    if total == 0:
        return keys, gidx

    depth_bits = np.ascontiguousarray(proj.depth).view(np.uint32).astype(np.uint64)
    g_of = np.repeat(np.arange(len(counts), dtype=np.int64), counts)
    starts = offsets - counts
    local = np.arange(total, dtype=np.int64) - starts[g_of]
    nx = (x1 - x0)[g_of]
    lx = local % nx
    ly = local // nx
    tile = (y0[g_of] + ly) * grid.tiles_x + (x0[g_of] + lx)
    keys[:] = (tile.astype(np.uint64) << np.uint64(32)) | depth_bits[g_of]
    gidx[:] = g_of
    return keys, gidx


def sort_pairs(keys: np.ndarray, gaussian_indices: np.ndarray) -> TilePairList:
    """Stable ascending sort by key; ties keep emission (Gaussian-index) order."""
    if len(keys) != len(gaussian_indices):
        raise InternalError("keys and gaussian_indices must be parallel")
    order = np.argsort(keys, kind="stable")
    return TilePairList(keys=keys[order], gaussian_indices=gaussian_indices[order])


def identify_tile_ranges(sorted_keys: np.ndarray, grid: TileGrid) -> np.ndarray:
    """Per-tile half-open spans into the sorted key array; empty tiles get (k, k)."""
    sorted_keys = np.asarray(sorted_keys, dtype=np.uint64)
    if len(sorted_keys) > 1 and np.any(sorted_keys[1:] < sorted_keys[:-1]):
        raise InternalError("keys are not sorted")
    tiles = (sorted_keys >> np.uint64(32)).astype(np.int64)
    if len(tiles) and int(tiles[-1]) >= grid.n_tiles:
        raise InternalError("key references a tile outside the grid")
    edges = np.arange(grid.n_tiles + 1, dtype=np.int64)
    bounds = np.searchsorted(tiles, edges)
    return np.stack([bounds[:-1], bounds[1:]], axis=1)


def build_pairs(proj: Projection, grid: TileGrid) -> TilePairList:
    """Run stages 2-5 in sequence and return the complete pair list."""
    counts = touched_counts(proj, grid)
    offsets = inclusive_sum(counts)
    keys, gidx = duplicate_with_keys(proj, offsets, grid)
    pairs = sort_pairs(keys, gidx)
    pairs.tile_ranges = identify_tile_ranges(pairs.keys, grid)
    return pairs
