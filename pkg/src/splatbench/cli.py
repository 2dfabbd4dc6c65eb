"""Command-line benchmark harness.

Subcommands render scenes, compare culling modes, emit per-pixel load maps,
and time the six pipeline stages. Delimited reports are CSV; the compare and
bench reports also render a matplotlib figure next to the CSV unless
``--no-figure`` is given.

Exit codes: 0 success, 2 usage or input error, 3 internal invariant
violation.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import statistics
import sys
from pathlib import Path

import numpy as np

from .errors import CapacityError, InternalError, SceneFormatError, SceneValidationError
from .figures import save_bench_figure, save_compare_figure
from .imageio import write_loadmap_png, write_pgm16, write_png, write_ppm
from .metrics import PSNR_IDENTICAL_SENTINEL, LoadStats, load_loss, psnr
from .pipeline import STAGE_NAMES, run_pipeline
from .projection import ALPHA_LOW, CullingMode
from .scene import Camera, SyntheticSpec, generate_synthetic, load_scene, save_scene

BENCH_COLUMNS = ["scene", "mode", "alpha_low", "gaussians", "culled", "pairs",
                 "t_preprocess", "t_inclusivesum", "t_duplicate", "t_sort",
                 "t_ranges", "t_render", "e_g", "e_n", "e_p", "fps"]

COMPARE_COLUMNS = ["scene", "mode", "alpha_low", "gaussians", "culled", "pairs",
                   "e_g", "e_n", "e_p", "image_sha256", "psnr_vs_first", "load_std"]

LOADMAP_COLUMNS = ["scene", "mode", "alpha_low", "gaussians", "mean", "std", "min", "max"]

_MODE_RANK = {CullingMode.BASELINE: 0, CullingMode.CIRCLE: 1, CullingMode.AABB: 2}


def load_camera(path) -> Camera:
    """Read a look-at camera sidecar (position, target, up, fov, resolution)."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid camera JSON ({exc})") from exc
    try:
        return Camera.from_lookat(
            position=doc["position"],
            target=doc["target"],
            up=doc.get("up", (0.0, 1.0, 0.0)),
            fov_y_deg=float(doc["fov_y_deg"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            near_plane=float(doc.get("near", 0.2)),
            background=doc.get("background", (0.0, 0.0, 0.0)),
        )
    except KeyError as exc:
        raise SceneFormatError(f"{path}: camera JSON missing key {exc}") from exc


def _append_csv(path, columns: list[str], rows: list[dict]) -> None:
    path = Path(path)
    fresh = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        if fresh:
            writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _image_hash(image) -> str:
    return hashlib.sha256(image.pixels.tobytes()).hexdigest()


def _psnr_csv(value: float) -> float:
    return PSNR_IDENTICAL_SENTINEL if math.isinf(value) else value


def _write_image(image, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(image, path)
    elif path.suffix.lower() == ".png":
        write_png(image, path)
    else:
        raise SceneFormatError(f"{path}: unknown image format (expected .png or .ppm)")


def _stats_row(scene_path, stats) -> dict:
    row = {
        "scene": str(scene_path),
        "mode": stats.mode.value,
        "alpha_low": stats.alpha_low,
        "gaussians": stats.gaussian_count,
        "culled": stats.culled_gaussians,
        "pairs": stats.pair_count,
        "e_g": stats.e_g,
        "e_n": stats.e_n,
        "e_p": stats.e_p,
        "fps": stats.fps,
    }
    for name in STAGE_NAMES:
        row[f"t_{name}"] = getattr(stats, f"t_{name}")
    return row


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    result = run_pipeline(scene, cam, mode=CullingMode(args.mode),
                          alpha_low=args.alpha_low, threads=args.threads)
    _write_image(result.image, args.output)
    if args.loadmap:
        write_loadmap_png(result.load_map, args.loadmap)
    if args.csv:
        _append_csv(args.csv, BENCH_COLUMNS, [_stats_row(args.scene, result.stats)])
    print(f"rendered {args.scene} [{args.mode}] -> {args.output} "
          f"({result.stats.pair_count} pairs, {result.stats.culled_gaussians} culled)")
    return 0


def cmd_compare(args) -> int:
    modes = [CullingMode(m) for m in args.modes]
    if len(modes) < 2:
        raise SceneFormatError("compare needs at least two --modes")
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)

    rows = []
    results = []
    for mode in modes:
        result = run_pipeline(scene, cam, mode=mode, alpha_low=args.alpha_low,
                              threads=args.threads)
        results.append(result)
        ref = results[0].image
        rows.append({
            "scene": str(args.scene),
            "mode": mode.value,
            "alpha_low": args.alpha_low,
            "gaussians": result.stats.gaussian_count,
            "culled": result.stats.culled_gaussians,
            "pairs": result.stats.pair_count,
            "e_g": result.stats.e_g,
            "e_n": result.stats.e_n,
            "e_p": result.stats.e_p,
            "image_sha256": _image_hash(result.image),
            "psnr_vs_first": _psnr_csv(psnr(result.image, ref)),
            "load_std": load_loss(result.load_map),
        })

    by_rank = sorted(zip(modes, rows), key=lambda mr: _MODE_RANK[mr[0]])
    for (m1, r1), (m2, r2) in zip(by_rank, by_rank[1:]):
        if r2["pairs"] > r1["pairs"]:
            raise InternalError(
                f"pair-count monotonicity violated: {m2.value} produced "
                f"{r2['pairs']} pairs vs {r1['pairs']} for {m1.value}")

    first = rows[0]
    for row in rows:
        reduction = 100.0 * (1.0 - row["pairs"] / first["pairs"]) if first["pairs"] else 0.0
        print(f"{row['mode']:>9}: pairs={row['pairs']:>9,} "
              f"reduction={reduction:6.2f}% hash={row['image_sha256'][:12]}")

    if args.csv:
        _append_csv(args.csv, COMPARE_COLUMNS, rows)
        figure = args.figure or (not args.no_figure and Path(args.csv).with_suffix(".png"))
        if figure:
            save_compare_figure(rows, figure)
            print(f"figure -> {figure}")
    return 0


def cmd_loadmap(args) -> int:
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    result = run_pipeline(scene, cam, mode=CullingMode(args.mode),
                          alpha_low=args.alpha_low, threads=args.threads)
    write_loadmap_png(result.load_map, args.output)
    if args.pgm:
        write_pgm16(result.load_map, args.pgm)
    stats = LoadStats.from_load_map(result.load_map)
    if args.csv:
        _append_csv(args.csv, LOADMAP_COLUMNS, [{
            "scene": str(args.scene),
            "mode": args.mode,
            "alpha_low": args.alpha_low,
            "gaussians": len(scene),
            "mean": stats.mean,
            "std": stats.std,
            "min": stats.min,
            "max": stats.max,
        }])
    print(f"load map -> {args.output} (mean={stats.mean:.3f} std={stats.std:.3f} "
          f"min={stats.min} max={stats.max})")
    return 0


def cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise SceneFormatError("repetitions must be >= 1")
    scene = load_scene(args.scene)
    cam = load_camera(args.camera)
    mode = CullingMode(args.mode)

    run_pipeline(scene, cam, mode=mode, alpha_low=args.alpha_low,
                 threads=args.threads)  # warm-up
    samples = [run_pipeline(scene, cam, mode=mode, alpha_low=args.alpha_low,
                            threads=args.threads).stats
               for _ in range(args.repetitions)]

    stage_median = {name: statistics.median(getattr(s, f"t_{name}") for s in samples)
                    for name in STAGE_NAMES}
    stage_min = {name: min(getattr(s, f"t_{name}") for s in samples)
                 for name in STAGE_NAMES}
    e_g = statistics.median(s.e_g for s in samples)
    e_n = statistics.median(s.e_n for s in samples)
    e_p = statistics.median(s.e_p for s in samples)
    total_median = statistics.median(s.total_seconds for s in samples)
    last = samples[-1]

    row = {
        "scene": str(args.scene),
        "mode": mode.value,
        "alpha_low": args.alpha_low,
        "gaussians": last.gaussian_count,
        "culled": last.culled_gaussians,
        "pairs": last.pair_count,
        "e_g": e_g,
        "e_n": e_n,
        "e_p": e_p,
        "fps": 1.0 / total_median if total_median > 0 else float("inf"),
    }
    for name in STAGE_NAMES:
        row[f"t_{name}"] = stage_median[name]

    for name in STAGE_NAMES:
        print(f"{name:>13}: median {stage_median[name] * 1e3:8.3f} ms   "
              f"min {stage_min[name] * 1e3:8.3f} ms")
    print(f"{'total':>13}: median {total_median * 1e3:8.3f} ms   fps {row['fps']:.1f}")

    if args.csv:
        _append_csv(args.csv, BENCH_COLUMNS, [row])
        figure = args.figure or (not args.no_figure and Path(args.csv).with_suffix(".png"))
        if figure:
            save_bench_figure(stage_median, figure,
                              title=f"{Path(str(args.scene)).name} [{mode.value}]")
            print(f"figure -> {figure}")
    return 0


def cmd_gen_scene(args) -> int:
    spec = SyntheticSpec(
        extent=args.extent,
        scale_range=tuple(args.scale_range),
        anisotropy_range=tuple(args.anisotropy_range),
        opacity_range=tuple(args.opacity_range),
    )
    scene = generate_synthetic(args.seed, args.count, spec)
    save_scene(scene, args.output)
    print(f"wrote {args.count} gaussians (seed {args.seed}) -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splatbench",
                                     description="Tile-based Gaussian splatting benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha-low", type=float, default=ALPHA_LOW, dest="alpha_low",
                        help="minimum splatting opacity (default 1/255)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker count; outputs are identical for any value")

    p = sub.add_parser("render", parents=[common], help="render one scene to an image")
    p.add_argument("scene")
    p.add_argument("--camera", required=True, help="camera JSON sidecar")
    p.add_argument("--mode", choices=[m.value for m in CullingMode], default="aabb")
    p.add_argument("--output", required=True, help="output image (.png or .ppm)")
    p.add_argument("--loadmap", help="also write a normalized grayscale load map PNG")
    p.add_argument("--csv", help="append a stats row to this CSV")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", parents=[common],
                       help="render under several culling modes and compare")
    p.add_argument("scene")
    p.add_argument("--camera", required=True)
    p.add_argument("--modes", nargs="+", choices=[m.value for m in CullingMode],
                   default=["baseline", "circle", "aabb"])
    p.add_argument("--csv")
    p.add_argument("--figure", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("loadmap", parents=[common], help="emit the per-pixel load map")
    p.add_argument("scene")
    p.add_argument("--camera", required=True)
    p.add_argument("--mode", choices=[m.value for m in CullingMode], default="aabb")
    p.add_argument("--output", required=True, help="grayscale PNG output")
    p.add_argument("--pgm", help="also write raw counts as 16-bit PGM")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_loadmap)

    p = sub.add_parser("bench", parents=[common], help="time the six pipeline stages")
    p.add_argument("scene")
    p.add_argument("--camera", required=True)
    p.add_argument("--mode", choices=[m.value for m in CullingMode], default="aabb")
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--csv")
    p.add_argument("--figure")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-scene", help="generate a seeded synthetic scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--output", required=True, help="scene file (.json or .ply)")
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--scale-range", type=float, nargs=2, default=(0.02, 0.08))
    p.add_argument("--anisotropy-range", type=float, nargs=2, default=(1.0, 4.0))
    p.add_argument("--opacity-range", type=float, nargs=2, default=(0.05, 0.95))
    p.set_defaults(func=cmd_gen_scene)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SceneFormatError, SceneValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InternalError, CapacityError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
