"""Image-quality metrics and the load-balancing loss.

The load-balancing loss is the population standard deviation of the
per-pixel composited-Gaussian counts: driving it down evens out the serial
work across pixel threads. It joins the L1 and structural-similarity image
terms in a convex combination whose weights sum to one; the default split is
(0.44, 0.11, 0.45), i.e. a 0.45 load weight with the remaining 0.55 of image
mass divided 4:1 between L1 and SSIM.

Because the per-pixel counts are integers, the load term is piecewise
constant in the Gaussian parameters; the toy optimizer therefore probes it
with a wide central finite difference on the opacities rather than
pretending an analytic gradient exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .pipeline import run_pipeline
from .projection import ALPHA_LOW, CullingMode
from .render import Image, LoadMap
from .scene import Camera, Gaussian3D, Scene

# PSNR of identical images is infinite; CSV reports use this sentinel instead.
PSNR_IDENTICAL_SENTINEL = 999.0

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for (L1, SSIM, load) that must sum to one."""

    lambda_l1: float = 0.44
    lambda_ssim: float = 0.11
    lambda_load: float = 0.45

    def __post_init__(self) -> None:
        for name in ("lambda_l1", "lambda_ssim", "lambda_load"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        total = self.lambda_l1 + self.lambda_ssim + self.lambda_load
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1 (got {total!r})")


DEFAULT_WEIGHTS = LossWeights()


@dataclass(frozen=True)
class LoadStats:
    """Summary of a load map's per-pixel counts."""

    mean: float
    std: float
    min: int
    max: int
    histogram: np.ndarray

    @classmethod
    def from_load_map(cls, load_map: LoadMap) -> LoadStats:
        counts = load_map.counts.ravel()
        return cls(
            mean=float(counts.mean()),
            std=load_loss(load_map),
            min=int(counts.min()),
            max=int(counts.max()),
            histogram=np.bincount(counts),
        )


def load_loss(load_map: LoadMap) -> float:
    """Population standard deviation of the per-pixel composited counts."""
    counts = np.asarray(load_map.counts, dtype=np.float64).ravel()
    if counts.size == 0:
        raise ValueError("load map is empty")
    mean = counts.mean()
    return float(np.sqrt(np.mean((counts - mean) ** 2)))


def _check_dims(a: Image, b: Image) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("image dimensions differ")


def l1_loss(a: Image, b: Image) -> float:
    """Mean absolute per-channel difference."""
    _check_dims(a, b)
    return float(np.mean(np.abs(a.pixels.astype(np.float64) - b.pixels.astype(np.float64))))


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB for unit-range images; inf when identical."""
    _check_dims(a, b)
    mse = float(np.mean((a.pixels.astype(np.float64) - b.pixels.astype(np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _ssim_window() -> np.ndarray:
    offsets = np.arange(_SSIM_WINDOW, dtype=np.float64) - _SSIM_WINDOW // 2
    w = np.exp(-(offsets ** 2) / (2.0 * _SSIM_SIGMA ** 2))
    return w / w.sum()


def _windowed_mean(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    out = correlate1d(img, window, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, window, axis=1, mode="constant", cval=0.0)


def ssim(a: Image, b: Image) -> float:
    """Mean structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Computed per channel on zero-padded windows and averaged over pixels and
    channels; images are expected in [0, 1].
    """
    _check_dims(a, b)
    window = _ssim_window()
    total = 0.0
    for c in range(3):
        x = a.pixels[:, :, c].astype(np.float64)
        y = b.pixels[:, :, c].astype(np.float64)
        mu_x = _windowed_mean(x, window)
        mu_y = _windowed_mean(y, window)
        var_x = _windowed_mean(x * x, window) - mu_x * mu_x
        var_y = _windowed_mean(y * y, window) - mu_y * mu_y
        cov_xy = _windowed_mean(x * y, window) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * cov_xy + _SSIM_C2)
        den = (mu_x * mu_x + mu_y * mu_y + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
        total += float(np.mean(num / den))
    return total / 3.0


def total_loss(rendered: Image, reference: Image, load_map: LoadMap,
               weights: LossWeights = DEFAULT_WEIGHTS) -> float:
    """Weighted sum of L1, (1 - SSIM), and the load-balancing loss."""
    value = 0.0
    if weights.lambda_l1:
        value += weights.lambda_l1 * l1_loss(rendered, reference)
    if weights.lambda_ssim:
        value += weights.lambda_ssim * (1.0 - ssim(rendered, reference))
    if weights.lambda_load:
        value += weights.lambda_load * load_loss(load_map)
    return value


# ---------------------------------------------------------------------------
# Toy load-balancing optimizer
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class BalanceStepResult:
    scene: Scene
    loss_before: float
    loss_after: float


def toy_balance_step(scene: Scene, cam: Camera, reference: Image,
                     weights: LossWeights, step: float,
                     alpha_low: float = ALPHA_LOW, fd_epsilon: float = 0.02,
                     mode: CullingMode = CullingMode.AABB,
                     threads: int = 1) -> BalanceStepResult:
    """One central-finite-difference descent step on the opacities only.

    The probe width ``fd_epsilon`` is deliberately wide so the piecewise
    constant load term registers in the difference; probe points are clipped
    to (0, 1] so every evaluation stays a valid scene. Desk scale only:
    at most 500 Gaussians, constant (degree-0) color.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if len(scene) > 500:
        raise ValueError("toy optimizer is limited to 500 Gaussians")
    if scene.sh_degree != 0:
        raise ValueError("toy optimizer requires SH degree 0")

    def evaluate(s: Scene) -> float:
        result = run_pipeline(s, cam, mode=mode, alpha_low=alpha_low, threads=threads)
        return total_loss(result.image, reference, result.load_map, weights)

    def with_opacity(index: int, value: float) -> Scene:
        gaussians = list(scene.gaussians)
        gaussians[index] = replace_opacity(gaussians[index], value)
        return Scene(gaussians=gaussians, sh_degree=scene.sh_degree)

    loss_before = evaluate(scene)
    grad = np.zeros(len(scene))
    for i, g in enumerate(scene.gaussians):
        hi = min(g.opacity + fd_epsilon, 1.0)
        lo = max(g.opacity - fd_epsilon, 1e-4)
        if hi <= lo:
            continue
        grad[i] = (evaluate(with_opacity(i, hi)) - evaluate(with_opacity(i, lo))) / (hi - lo)

    new_gaussians = [
        replace_opacity(g, float(np.clip(g.opacity - step * grad[i], 1e-4, 1.0)))
        for i, g in enumerate(scene.gaussians)
    ]
    new_scene = Scene(gaussians=new_gaussians, sh_degree=scene.sh_degree)
    return BalanceStepResult(scene=new_scene, loss_before=loss_before,
                             loss_after=evaluate(new_scene))


def replace_opacity(g: Gaussian3D, value: float) -> Gaussian3D:
    return Gaussian3D(center=g.center.copy(), scale=g.scale.copy(),
                      rotation=g.rotation.copy(), opacity=value,
                      sh_coeffs=g.sh_coeffs.copy())
