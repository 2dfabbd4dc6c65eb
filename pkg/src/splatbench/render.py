"""Pixel-parallel front-to-back alpha blending (the final pipeline stage).

Each pixel walks its tile's depth-sorted pair span: the splatting opacity is
``alpha = min(0.99, sigma * exp(-0.5 * d^T conic d))``, contributions with
``alpha < alpha_low`` are skipped, the rest are composited front-to-back,
and the walk stops once the accumulated transmittance drops below the
termination threshold. The per-pixel load is the number of contributions
actually composited.

The kernel processes pairs in chunks but reproduces the scalar sequential
recurrence bit for bit (prefix products/sums are seeded with the running
carry), and skipped contributions are exact no-ops. Both properties together
make renders bitwise identical across culling modes, worker counts, and the
brute-force reference renderer.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InternalError
from .projection import Projection
from .scene import Camera
from .tiling import TileGrid, TilePairList

# Per-contribution opacity ceiling.
ALPHA_CLAMP = 0.99

# Front-to-back blending stops once transmittance falls below this.
TERMINATION_THRESHOLD = 1e-4

_PAIR_CHUNK = 2048


@dataclass(eq=False)
class Image:
    """Row-major float32 RGB image with channels in [0, 1]."""

    width: int
    height: int
    pixels: np.ndarray  # (height, width, 3) float32


@dataclass(eq=False)
class LoadMap:
    """Per-pixel count of composited Gaussians."""

    width: int
    height: int
    counts: np.ndarray  # (height, width) int32


def composite_pixels(px: np.ndarray, py: np.ndarray, order: np.ndarray,
                     proj: Projection, alpha_low: float, background,
                     term_threshold: float = TERMINATION_THRESHOLD,
                     present_fn: Callable[[np.ndarray], np.ndarray] | None = None,
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Blend the pair sequence ``order`` over a flat block of pixels.

    ``present_fn(idx)``, when given, returns a (len(idx), n_pixels) mask of
    which pairs exist for which pixels; absent pairs are exact no-ops. Used
    by the reference renderer to reproduce tile-granular footprints without
    building tile lists.

    Returns (rgb (n, 3) float32 clamped to [0, 1], composited counts (n,) int32).
    """
    npix = len(px)
    alpha_low32 = np.float32(alpha_low)
    term32 = np.float32(term_threshold)
    clamp32 = np.float32(ALPHA_CLAMP)
    one32 = np.float32(1.0)
    zero32 = np.float32(0.0)

    carry_t = np.ones(npix, dtype=np.float32)
    carry_c = np.zeros((npix, 3), dtype=np.float32)
    counts = np.zeros(npix, dtype=np.int32)
    frozen = np.zeros(npix, dtype=bool)

    mean_x = proj.mean2d[:, 0]
    mean_y = proj.mean2d[:, 1]
    con_a = proj.conic[:, 0]
    con_b = proj.conic[:, 1]
    con_c = proj.conic[:, 2]

    for lo in range(0, len(order), _PAIR_CHUNK):
        idx = order[lo:lo + _PAIR_CHUNK]
        dx = px[None, :] - mean_x[idx][:, None]
        dy = py[None, :] - mean_y[idx][:, None]
        power = (np.float32(-0.5) * (con_a[idx][:, None] * dx * dx
                                     + con_c[idx][:, None] * dy * dy)
                 - con_b[idx][:, None] * dx * dy)
        alpha = np.minimum(proj.opacity[idx][:, None] * np.exp(power), clamp32)
        eff = np.where(alpha >= alpha_low32, alpha, zero32)
        if present_fn is not None:
            eff = np.where(present_fn(idx), eff, zero32)
        eff[:, frozen] = zero32

        trans = np.cumprod(np.vstack([carry_t[None, :], one32 - eff]), axis=0)
        t_before = trans[:-1]
        live = t_before >= term32
        weight = np.where(live, eff * t_before, zero32)
        contrib = weight[:, :, None] * proj.color[idx][:, None, :]
        carry_c = np.cumsum(np.concatenate([carry_c[None], contrib], axis=0),
                            axis=0, dtype=np.float32)[-1]
        counts += ((eff > 0) & live).sum(axis=0, dtype=np.int32)

        t_after = trans[1:]
        crossed = t_after < term32
        any_crossed = crossed.any(axis=0)
        first = crossed.argmax(axis=0)
        carry_t = np.where(any_crossed,
                           t_after[first, np.arange(npix)],
                           t_after[-1])
        frozen |= any_crossed
        if frozen.all():
            break

    bg = np.asarray(background, dtype=np.float32).reshape(1, 3)
    rgb = carry_c + carry_t[:, None] * bg
    np.clip(rgb, 0.0, 1.0, out=rgb)
    return rgb, counts


def render(proj: Projection, pairs: TilePairList, grid: TileGrid, cam: Camera,
           alpha_low: float, term_threshold: float = TERMINATION_THRESHOLD,
           threads: int = 1) -> tuple[Image, LoadMap]:
    """Render every tile's pair span into an image and per-pixel load map."""
    _check_consistency(proj, pairs, grid, cam)
    h, w = cam.height, cam.width
    pixels = np.empty((h, w, 3), dtype=np.float32)
    counts = np.zeros((h, w), dtype=np.int32)
    bg = np.asarray(cam.background, dtype=np.float32)
    ranges = pairs.tile_ranges
    ts = grid.tile_size

    def render_tile(tile: int) -> None:
        ty, tx = divmod(tile, grid.tiles_x)
        x0, y0 = tx * ts, ty * ts
        x1, y1 = min(x0 + ts, w), min(y0 + ts, h)
        start, end = int(ranges[tile, 0]), int(ranges[tile, 1])
        if start == end:
            pixels[y0:y1, x0:x1] = bg
            return
        xs = np.arange(x0, x1, dtype=np.float32)
        ys = np.arange(y0, y1, dtype=np.float32)
        px = np.tile(xs, y1 - y0)
        py = np.repeat(ys, x1 - x0)
        span = pairs.gaussian_indices[start:end]
        rgb, cnt = composite_pixels(px, py, span, proj, alpha_low,
                                    cam.background, term_threshold)
        pixels[y0:y1, x0:x1] = rgb.reshape(y1 - y0, x1 - x0, 3)
        counts[y0:y1, x0:x1] = cnt.reshape(y1 - y0, x1 - x0)

    n_tiles = grid.n_tiles
    if threads <= 1:
        for tile in range(n_tiles):
            render_tile(tile)
    else:
        def run_block(bounds: tuple[int, int]) -> None:
            for tile in range(bounds[0], bounds[1]):
                render_tile(tile)

        edges = np.linspace(0, n_tiles, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_block, zip(edges[:-1], edges[1:])))

    return Image(width=w, height=h, pixels=pixels), LoadMap(width=w, height=h, counts=counts)


def _check_consistency(proj: Projection, pairs: TilePairList, grid: TileGrid,
                       cam: Camera) -> None:
    if pairs.tile_ranges is None:
        raise InternalError("tile ranges were not identified")
    if pairs.tile_ranges.shape != (grid.n_tiles, 2):
        raise InternalError("tile ranges do not match the grid")
    if len(pairs.keys) != len(pairs.gaussian_indices):
        raise InternalError("pair arrays are not parallel")
    if len(pairs.keys) and int(pairs.gaussian_indices.max()) >= len(proj):
        raise InternalError("pair references a Gaussian outside the projection")
    if (grid.width, grid.height) != (cam.width, cam.height):
        raise InternalError("grid does not match the camera resolution")
    if len(pairs.keys):
        if int(pairs.tile_ranges[0, 0]) != 0 or int(pairs.tile_ranges[-1, 1]) != len(pairs.keys):
            raise InternalError("tile ranges do not partition the pair list")
