"""Command-line harness: artifacts, CSV schemas, exit codes."""

import csv
import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from splatbench import Scene, generate_synthetic, save_json
from splatbench.cli import BENCH_COLUMNS, COMPARE_COLUMNS, main

from conftest import gaussian, make_scene


def write_camera(path, width=96, height=96, distance=5.0, background=(0, 0, 0)):
    path.write_text(json.dumps({
        "position": [0.0, 0.0, -distance],
        "target": [0.0, 0.0, 0.0],
        "fov_y_deg": 60.0,
        "width": width,
        "height": height,
        "background": list(background),
    }))
    return path


def write_elongated_scene(path, count=60, seed=3):
    """Thin, low-opacity splats: distinct pair counts for every culling mode."""
    rng = np.random.default_rng(seed)
    gaussians = []
    for _ in range(count):
        theta = rng.uniform(0, math.pi)
        q = (math.cos(theta / 2), 0.0, 0.0, math.sin(theta / 2))
        major = rng.uniform(0.5, 1.2)
        gaussians.append(gaussian(
            center=rng.uniform(-1.0, 1.0, 3),
            scale=(major, major / rng.uniform(4.0, 8.0), 0.05),
            rotation=q,
            opacity=rng.uniform(0.02, 0.15),
            rgb=rng.uniform(0, 1, 3),
        ))
    save_json(make_scene(gaussians), path)
    return path


def write_axial_scene(path, count=12):
    """Isotropic Gaussians on the optical axis: box and circle footprints agree."""
    rng = np.random.default_rng(5)
    gaussians = [
        gaussian(center=(0.0, 0.0, float(z)), scale=(s, s, s), opacity=float(o))
        for z, s, o in zip(np.linspace(-1, 1, count),
                           rng.uniform(0.05, 0.3, count),
                           rng.uniform(0.05, 0.3, count))
    ]
    save_json(make_scene(gaussians), path)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRenderCommand:
    def test_smoke_png_and_csv(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(1, 10), scene)
        cam = write_camera(tmp_path / "cam.json")
        out = tmp_path / "img.png"
        csv_path = tmp_path / "stats.csv"
        code = main(["render", str(scene), "--camera", str(cam), "--mode", "aabb",
                     "--output", str(out), "--csv", str(csv_path)])
        assert code == 0
        assert out.read_bytes().startswith(b"\x89PNG")
        rows = read_csv(csv_path)
        assert len(rows) == 1
        assert list(rows[0].keys()) == BENCH_COLUMNS

    def test_modes_produce_identical_png_bytes(self, tmp_path):
        scene = write_elongated_scene(tmp_path / "scene.json")
        cam = write_camera(tmp_path / "cam.json")
        hashes = {}
        for mode in ("baseline", "aabb"):
            out = tmp_path / f"{mode}.png"
            assert main(["render", str(scene), "--camera", str(cam), "--mode", mode,
                         "--output", str(out)]) == 0
            hashes[mode] = hashlib.sha256(out.read_bytes()).hexdigest()
        assert hashes["baseline"] == hashes["aabb"]

    def test_higher_alpha_low_culls_more(self, tmp_path):
        scene = write_elongated_scene(tmp_path / "scene.json")
        cam = write_camera(tmp_path / "cam.json")
        culled = {}
        for tag, alpha in (("lo", 1.0 / 255.0), ("hi", 0.5)):
            csv_path = tmp_path / f"{tag}.csv"
            assert main(["render", str(scene), "--camera", str(cam), "--mode", "aabb",
                         "--alpha-low", str(alpha),
                         "--output", str(tmp_path / f"{tag}.png"),
                         "--csv", str(csv_path)]) == 0
            culled[tag] = int(read_csv(csv_path)[0]["culled"])
        assert culled["hi"] > culled["lo"]

    def test_unreadable_scene_exits_2(self, tmp_path):
        cam = write_camera(tmp_path / "cam.json")
        code = main(["render", str(tmp_path / "missing.json"), "--camera", str(cam),
                     "--output", str(tmp_path / "x.png")])
        assert code == 2

    def test_invalid_mode_exits_2(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(1, 5), scene)
        cam = write_camera(tmp_path / "cam.json")
        with pytest.raises(SystemExit) as exc:
            main(["render", str(scene), "--camera", str(cam), "--mode", "bogus",
                  "--output", str(tmp_path / "x.png")])
        assert exc.value.code == 2

    def test_ppm_output(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(1, 5), scene)
        cam = write_camera(tmp_path / "cam.json", width=20, height=10)
        out = tmp_path / "img.ppm"
        assert main(["render", str(scene), "--camera", str(cam), "--output", str(out)]) == 0
        assert out.read_bytes().startswith(b"P6\n20 10\n255\n")


class TestCompareCommand:
    def test_anisotropic_scene_strict_reduction(self, tmp_path, capsys):
        scene = write_elongated_scene(tmp_path / "scene.json")
        cam = write_camera(tmp_path / "cam.json", width=128, height=128)
        csv_path = tmp_path / "compare.csv"
        code = main(["compare", str(scene), "--camera", str(cam),
                     "--modes", "baseline", "circle", "aabb", "--csv", str(csv_path)])
        assert code == 0
        rows = read_csv(csv_path)
        assert list(rows[0].keys()) == COMPARE_COLUMNS
        pairs = [int(r["pairs"]) for r in rows]
        assert pairs[2] < pairs[1] < pairs[0]
        assert len({r["image_sha256"] for r in rows}) == 1
        assert "reduction" in capsys.readouterr().out
        assert (tmp_path / "compare.png").exists()  # figure alongside the CSV

    def test_axial_scene_box_equals_circle(self, tmp_path):
        scene = write_axial_scene(tmp_path / "scene.json")
        cam = write_camera(tmp_path / "cam.json", width=128, height=128)
        csv_path = tmp_path / "compare.csv"
        assert main(["compare", str(scene), "--camera", str(cam),
                     "--modes", "circle", "aabb", "--csv", str(csv_path),
                     "--no-figure"]) == 0
        rows = read_csv(csv_path)
        assert int(rows[0]["pairs"]) == int(rows[1]["pairs"])
        assert not (tmp_path / "compare.png").exists()

    def test_single_mode_exits_2(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(1, 5), scene)
        cam = write_camera(tmp_path / "cam.json")
        code = main(["compare", str(scene), "--camera", str(cam), "--modes", "aabb"])
        assert code == 2


class TestLoadmapCommand:
    def test_empty_scene_black_map(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(Scene(gaussians=[], sh_degree=0), scene)
        cam = write_camera(tmp_path / "cam.json", width=32, height=32)
        out = tmp_path / "map.png"
        csv_path = tmp_path / "load.csv"
        assert main(["loadmap", str(scene), "--camera", str(cam), "--output", str(out),
                     "--csv", str(csv_path)]) == 0
        row = read_csv(csv_path)[0]
        assert float(row["std"]) == 0.0
        assert int(row["max"]) == 0
        assert out.read_bytes().startswith(b"\x89PNG")

    def test_uniform_coverage_has_zero_std(self, tmp_path):
        # One broad splat whose opacity stays above the floor across the
        # whole frame: every pixel composites exactly one Gaussian.
        scene = tmp_path / "scene.json"
        save_json(make_scene([gaussian(scale=(5.0, 5.0, 5.0), opacity=0.9)]), scene)
        cam = write_camera(tmp_path / "cam.json", width=32, height=32)
        csv_path = tmp_path / "load.csv"
        assert main(["loadmap", str(scene), "--camera", str(cam),
                     "--output", str(tmp_path / "map.png"), "--csv", str(csv_path)]) == 0
        row = read_csv(csv_path)[0]
        assert float(row["std"]) == 0.0
        assert (int(row["min"]), int(row["max"])) == (1, 1)

    def test_pgm16_written(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(2, 30), scene)
        cam = write_camera(tmp_path / "cam.json", width=48, height=32)
        pgm = tmp_path / "map.pgm"
        assert main(["loadmap", str(scene), "--camera", str(cam),
                     "--output", str(tmp_path / "map.png"), "--pgm", str(pgm)]) == 0
        assert pgm.read_bytes().startswith(b"P5\n48 32\n65535\n")

    def test_cluster_peaks_at_center(self, tmp_path):
        # The CSV extremes must agree with the brute-force reference load map.
        from splatbench import Camera, render_reference

        gaussians = [gaussian(center=(0, 0, 0.01 * k), scale=(0.08,) * 3, opacity=0.2)
                     for k in range(12)]
        scene_obj = make_scene(gaussians)
        scene = tmp_path / "scene.json"
        save_json(scene_obj, scene)
        cam = write_camera(tmp_path / "cam.json", width=33, height=33)
        csv_path = tmp_path / "load.csv"
        assert main(["loadmap", str(scene), "--camera", str(cam),
                     "--output", str(tmp_path / "map.png"), "--csv", str(csv_path)]) == 0
        row = read_csv(csv_path)[0]
        cam_obj = Camera.from_lookat((0, 0, -5), (0, 0, 0), fov_y_deg=60.0,
                                     width=33, height=33)
        _, reference_map = render_reference(scene_obj, cam_obj)
        assert int(row["max"]) == int(reference_map.counts.max()) == 12
        assert reference_map.counts[16, 16] == reference_map.counts.max()


class TestBenchCommand:
    def test_schema_and_accounting(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(3, 80), scene)
        cam = write_camera(tmp_path / "cam.json")
        csv_path = tmp_path / "bench.csv"
        assert main(["bench", str(scene), "--camera", str(cam), "--repetitions", "3",
                     "--csv", str(csv_path), "--no-figure"]) == 0
        row = read_csv(csv_path)[0]
        assert list(row.keys()) == BENCH_COLUMNS
        stage_sum = sum(float(row[f"t_{n}"]) for n in
                        ("preprocess", "inclusivesum", "duplicate", "sort", "ranges", "render"))
        categories = float(row["e_g"]) + float(row["e_n"]) + float(row["e_p"])
        assert categories == pytest.approx(stage_sum, rel=0.05)
        assert float(row["fps"]) > 0

    def test_non_timing_columns_reproducible(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(4, 60), scene)
        cam = write_camera(tmp_path / "cam.json")
        rows = []
        for tag in ("a", "b"):
            csv_path = tmp_path / f"{tag}.csv"
            assert main(["bench", str(scene), "--camera", str(cam), "--repetitions", "2",
                         "--csv", str(csv_path), "--no-figure"]) == 0
            rows.append(read_csv(csv_path)[0])
        for col in ("scene", "mode", "alpha_low", "gaussians", "culled", "pairs"):
            assert rows[0][col] == rows[1][col]

    def test_figure_written_by_default(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(5, 40), scene)
        cam = write_camera(tmp_path / "cam.json", width=64, height=64)
        csv_path = tmp_path / "bench.csv"
        assert main(["bench", str(scene), "--camera", str(cam), "--repetitions", "1",
                     "--csv", str(csv_path)]) == 0
        assert (tmp_path / "bench.png").exists()


class TestGenSceneCommand:
    def test_deterministic_output(self, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for p in paths:
            assert main(["gen-scene", "--seed", "9", "--count", "25", "--output", str(p)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_round_trip_through_ply(self, tmp_path):
        out = tmp_path / "s.ply"
        assert main(["gen-scene", "--seed", "2", "--count", "15", "--output", str(out)]) == 0
        from splatbench import load_ply

        assert len(load_ply(out)) == 15

    def test_zero_count_exits_2(self, tmp_path):
        assert main(["gen-scene", "--seed", "1", "--count", "0",
                     "--output", str(tmp_path / "s.json")]) == 2


class TestModuleEntry:
    def test_python_dash_m_invocation(self, tmp_path):
        scene = tmp_path / "scene.json"
        save_json(generate_synthetic(1, 5), scene)
        cam = write_camera(tmp_path / "cam.json", width=32, height=32)
        out = tmp_path / "img.png"
        proc = subprocess.run(
            [sys.executable, "-m", "splatbench.cli", "render", str(scene),
             "--camera", str(cam), "--output", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
