"""Shared fixtures and scene builders for the test suite."""

import numpy as np
import pytest

from splatbench import Camera, Gaussian3D, Scene, SyntheticSpec, generate_synthetic


def make_camera(width=64, height=64, distance=5.0, fov=60.0, background=(0.0, 0.0, 0.0)):
    return Camera.from_lookat(
        position=(0.0, 0.0, -distance), target=(0.0, 0.0, 0.0),
        fov_y_deg=fov, width=width, height=height, background=background,
    )


def gaussian(center=(0, 0, 0), scale=(0.1, 0.1, 0.1), rotation=(1, 0, 0, 0),
             opacity=0.5, rgb=(1.0, 1.0, 1.0)):
    """Degree-0 Gaussian whose evaluated color is (approximately) ``rgb``."""
    dc = (np.asarray(rgb, dtype=np.float64) - 0.5) / 0.28209479177387814
    return Gaussian3D(center=center, scale=scale, rotation=rotation,
                      opacity=opacity, sh_coeffs=dc[None, :])


def make_scene(gaussians):
    return Scene(gaussians=list(gaussians), sh_degree=0)


def mixed_spec():
    """Synthetic-scene parameters with mixed anisotropy and the full opacity range."""
    return SyntheticSpec(extent=1.2, scale_range=(0.01, 0.06),
                         anisotropy_range=(1.0, 6.0), opacity_range=(0.01, 1.0))


def assert_scenes_close(a: Scene, b: Scene, atol=1e-6):
    assert a.sh_degree == b.sh_degree
    assert len(a) == len(b)
    for i, (ga, gb) in enumerate(zip(a.gaussians, b.gaussians)):
        np.testing.assert_allclose(ga.center, gb.center, atol=atol, err_msg=f"center {i}")
        np.testing.assert_allclose(ga.scale, gb.scale, atol=atol, err_msg=f"scale {i}")
        np.testing.assert_allclose(ga.rotation, gb.rotation, atol=atol, err_msg=f"rotation {i}")
        np.testing.assert_allclose(ga.opacity, gb.opacity, atol=atol, err_msg=f"opacity {i}")
        np.testing.assert_allclose(ga.sh_coeffs, gb.sh_coeffs, atol=atol, err_msg=f"sh {i}")


@pytest.fixture
def camera64():
    return make_camera(64, 64)


@pytest.fixture
def scene_small():
    return generate_synthetic(11, 60, mixed_spec())
