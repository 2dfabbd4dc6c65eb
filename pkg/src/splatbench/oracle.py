"""Brute-force reference renderer that bypasses the tile binning machinery.

Every surviving Gaussian is sorted once, globally, by (depth bits, index);
each pixel then walks that single list with the same blend, skip, and
termination rules as the tiled renderer. A contribution only exists for a
pixel when the Gaussian's footprint rectangle overlaps the pixel's tile,
mirroring the tile-granular truncation of the real pipeline; the overlap
test here is an independent interval comparison, not the binning code.

Bitwise equality against the pipeline therefore isolates stages 2-5
(counting, prefix sum, key packing, sorting, range identification).
"""

from __future__ import annotations

import numpy as np

from .projection import ALPHA_LOW, CullingMode, preprocess
from .render import TERMINATION_THRESHOLD, Image, LoadMap, composite_pixels
from .scene import Camera, Scene
from .tiling import TILE_SIZE

def render_reference(scene: Scene, cam: Camera, alpha_low: float = ALPHA_LOW,
                     term_threshold: float = TERMINATION_THRESHOLD) -> tuple[Image, LoadMap]:
    """Render without tiling; single-threaded, correctness over speed."""
    proj = preprocess(scene, cam, mode=CullingMode.BASELINE, alpha_low=alpha_low)

    valid_idx = np.flatnonzero(proj.valid)
    depth_bits = np.ascontiguousarray(proj.depth).view(np.uint32)
    order = valid_idx[np.argsort(depth_bits[valid_idx], kind="stable")]

    mean_x = proj.mean2d[:, 0].astype(np.float64)
    mean_y = proj.mean2d[:, 1].astype(np.float64)
    ext_x = proj.ext_x.astype(np.float64)
    ext_y = proj.ext_y.astype(np.float64)

    h, w = cam.height, cam.width
    pixels = np.empty((h, w, 3), dtype=np.float32)
    counts = np.zeros((h, w), dtype=np.int32)

    # One pixel block per tile row. Gaussians whose footprint cannot reach
    # the row are dropped from its walk up front; for every pixel of the
    # block they would be exact no-ops, so the per-pixel blend sequence is
    # unchanged.
    for row0 in range(0, h, TILE_SIZE):
        row1 = min(row0 + TILE_SIZE, h)
        xs = np.arange(w, dtype=np.float32)
        ys = np.arange(row0, row1, dtype=np.float32)
        px = np.tile(xs, row1 - row0)
        py = np.repeat(ys, w)

        row_top = float(row0)
        row_bottom = row_top + TILE_SIZE
        reachable = ((mean_y[order] - ext_y[order] < row_bottom)
                     & (mean_y[order] + ext_y[order] >= row_top)
                     & (mean_x[order] - ext_x[order] < grid_right(w))
                     & (mean_x[order] + ext_x[order] >= 0.0))
        row_order = order[reachable]

        # Tile spans of each pixel, as half-open pixel intervals.
        tile_x0 = (np.floor_divide(px.astype(np.int64), TILE_SIZE) * TILE_SIZE).astype(np.float64)
        tile_y0 = (np.floor_divide(py.astype(np.int64), TILE_SIZE) * TILE_SIZE).astype(np.float64)

        def present(idx: np.ndarray) -> np.ndarray:
            left = mean_x[idx][:, None] - ext_x[idx][:, None]
            right = mean_x[idx][:, None] + ext_x[idx][:, None]
            top = mean_y[idx][:, None] - ext_y[idx][:, None]
            bottom = mean_y[idx][:, None] + ext_y[idx][:, None]
            return ((left < tile_x0[None, :] + TILE_SIZE) & (right >= tile_x0[None, :])
                    & (top < tile_y0[None, :] + TILE_SIZE) & (bottom >= tile_y0[None, :]))

        rgb, cnt = composite_pixels(px, py, row_order, proj, alpha_low,
                                    cam.background, term_threshold,
                                    present_fn=present)
        pixels[row0:row1] = rgb.reshape(row1 - row0, w, 3)
        counts[row0:row1] = cnt.reshape(row1 - row0, w)

    return Image(width=w, height=h, pixels=pixels), LoadMap(width=w, height=h, counts=counts)


def grid_right(width: int) -> float:
    """Pixel coordinate of the right edge of the rightmost (possibly partial) tile."""
    return float(-(-width // TILE_SIZE) * TILE_SIZE)
