"""Six-stage pipeline orchestration with per-stage wall-clock timing.

The stage costs group into three buckets by parallelism granularity:
``e_g`` (Gaussian-parallel: preprocessing, counting/prefix sum, key
duplication), ``e_n`` (pair-parallel: sorting, range identification) and
``e_p`` (pixel-parallel: blending). The bucket values are sums of the stage
timings, so the accounting identity holds exactly for a single run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .projection import ALPHA_LOW, COV_DILATION, CullingMode, Projection, preprocess
from .render import TERMINATION_THRESHOLD, Image, LoadMap, render
from .scene import Camera, Scene
from .tiling import (TileGrid, TilePairList, duplicate_with_keys, identify_tile_ranges,
                     inclusive_sum, sort_pairs, touched_counts)

STAGE_NAMES = ("preprocess", "inclusivesum", "duplicate", "sort", "ranges", "render")


@dataclass(frozen=True)
class RenderStats:
    """Timings and counters for one pipeline run."""

    mode: CullingMode
    alpha_low: float
    gaussian_count: int
    culled_gaussians: int
    pair_count: int
    t_preprocess: float
    t_inclusivesum: float
    t_duplicate: float
    t_sort: float
    t_ranges: float
    t_render: float

    @property
    def e_g(self) -> float:
        """Gaussian-parallel bucket (stages 1-3)."""
        return self.t_preprocess + self.t_inclusivesum + self.t_duplicate

    @property
    def e_n(self) -> float:
        """Pair-parallel bucket (stages 4-5)."""
        return self.t_sort + self.t_ranges

    @property
    def e_p(self) -> float:
        """Pixel-parallel bucket (stage 6)."""
        return self.t_render

    @property
    def total_seconds(self) -> float:
        return (self.t_preprocess + self.t_inclusivesum + self.t_duplicate
                + self.t_sort + self.t_ranges + self.t_render)

    @property
    def fps(self) -> float:
        total = self.total_seconds
        return 1.0 / total if total > 0 else float("inf")

    def stage_seconds(self) -> dict[str, float]:
        return {
            "preprocess": self.t_preprocess,
            "inclusivesum": self.t_inclusivesum,
            "duplicate": self.t_duplicate,
            "sort": self.t_sort,
            "ranges": self.t_ranges,
            "render": self.t_render,
        }


@dataclass(eq=False)
class PipelineResult:
    image: Image
    load_map: LoadMap
    stats: RenderStats
    projection: Projection
    pairs: TilePairList


def run_pipeline(scene: Scene, cam: Camera, mode: CullingMode = CullingMode.AABB,
                 alpha_low: float = ALPHA_LOW, threads: int = 1,
                 dilation: float = COV_DILATION,
                 term_threshold: float = TERMINATION_THRESHOLD) -> PipelineResult:
    """Run all six stages for one scene/camera/mode combination."""
    mode = CullingMode(mode)
    grid = TileGrid(width=cam.width, height=cam.height)

    t0 = time.perf_counter()
    proj = preprocess(scene, cam, mode=mode, alpha_low=alpha_low,
                      dilation=dilation, threads=threads)
    t1 = time.perf_counter()
    counts = touched_counts(proj, grid)
    offsets = inclusive_sum(counts)
    t2 = time.perf_counter()
    keys, gidx = duplicate_with_keys(proj, offsets, grid)
    t3 = time.perf_counter()
    pairs = sort_pairs(keys, gidx)
    t4 = time.perf_counter()
    pairs.tile_ranges = identify_tile_ranges(pairs.keys, grid)
    t5 = time.perf_counter()
    image, load_map = render(proj, pairs, grid, cam, alpha_low,
                             term_threshold=term_threshold, threads=threads)
    t6 = time.perf_counter()

    stats = RenderStats(
        mode=mode,
        alpha_low=alpha_low,
        gaussian_count=len(scene),
        culled_gaussians=proj.culled_count,
        pair_count=len(pairs),
        t_preprocess=t1 - t0,
        t_inclusivesum=t2 - t1,
        t_duplicate=t3 - t2,
        t_sort=t4 - t3,
        t_ranges=t5 - t4,
        t_render=t6 - t5,
    )
    return PipelineResult(image=image, load_map=load_map, stats=stats,
                          projection=proj, pairs=pairs)
