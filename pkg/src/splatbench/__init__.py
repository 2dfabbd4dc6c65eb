"""splatbench: deterministic tile-based Gaussian splatting rasterizer.

A software implementation of the six-stage splatting pipeline with three
interchangeable early-culling strategies (baseline confidence square,
opacity-bounded circle, per-axis bounding box), a brute-force reference
renderer for equivalence testing, image-quality and load-balancing metrics,
and a CLI benchmark harness.
"""

from .errors import CapacityError, InternalError, SceneFormatError, SceneValidationError
from .metrics import (DEFAULT_WEIGHTS, BalanceStepResult, LoadStats, LossWeights,
                      l1_loss, load_loss, psnr, ssim, total_loss, toy_balance_step)
from .oracle import render_reference
from .pipeline import PipelineResult, RenderStats, run_pipeline
from .projection import (ALPHA_LOW, COV_DILATION, CullExtent, CullingMode,
                         EllipseCoefficients, ProjectedGaussian, Projection,
                         aabb_extents, bounding_box_halfwidths, bounding_circle_radius,
                         build_covariance3d, eigen_extents, ellipse_coefficients,
                         evaluate_sh, preprocess, project_gaussian, radius_adaptive,
                         radius_baseline)
from .render import (ALPHA_CLAMP, TERMINATION_THRESHOLD, Image, LoadMap,
                     composite_pixels, render)
from .scene import (Camera, Gaussian3D, Scene, SceneDiagnostic, SyntheticSpec,
                    generate_synthetic, load_json, load_ply, load_scene, save_json,
                    save_ply, save_scene, validate_scene)
from .tiling import (TILE_SIZE, TileGrid, TilePairList, TileRect, build_pairs,
                     duplicate_with_keys, identify_tile_ranges, inclusive_sum,
                     sort_pairs, tiles_touched, touched_counts)

__version__ = "0.1.0"

__all__ = [
    "ALPHA_CLAMP", "ALPHA_LOW", "COV_DILATION", "DEFAULT_WEIGHTS", "TERMINATION_THRESHOLD",
    "TILE_SIZE", "BalanceStepResult", "Camera", "CapacityError", "CullExtent",
    "CullingMode", "EllipseCoefficients", "Gaussian3D", "Image", "InternalError",
    "LoadMap", "LoadStats", "LossWeights", "PipelineResult", "ProjectedGaussian",
    "Projection", "RenderStats", "Scene", "SceneDiagnostic", "SceneFormatError",
    "SceneValidationError", "SyntheticSpec", "TileGrid", "TilePairList", "TileRect",
    "aabb_extents", "bounding_box_halfwidths", "bounding_circle_radius",
    "build_covariance3d", "build_pairs", "composite_pixels", "duplicate_with_keys",
    "eigen_extents", "ellipse_coefficients", "evaluate_sh", "generate_synthetic",
    "identify_tile_ranges", "inclusive_sum", "l1_loss", "load_json", "load_loss",
    "load_ply", "load_scene", "preprocess", "project_gaussian", "psnr",
    "radius_adaptive", "radius_baseline", "render", "render_reference",
    "run_pipeline", "save_json", "save_ply", "save_scene", "sort_pairs",
    "ssim", "tiles_touched", "total_loss", "touched_counts", "toy_balance_step",
    "validate_scene",
]
