"""Per-Gaussian view-dependent preprocessing.

This is stage 1 of the pipeline: each Gaussian is independently transformed
to view space, its world covariance is pushed through the local affine
approximation of the perspective projection, and a per-strategy culling
extent (in pixels) is derived from the projected covariance.

Three culling strategies are exposed:

* ``baseline``  - a square of half-width ``ceil(3 * sqrt(lambda_max))``, the
  conventional three-standard-deviation footprint;
* ``circle``    - the bounding circle of the iso-opacity ellipse at the
  minimum splatting opacity, clamped by the baseline radius;
* ``aabb``      - per-axis half-widths of that same ellipse, clamped per
  axis by the baseline radius, enabling asymmetric culling.

All operations are pure per-Gaussian functions; the batched pass writes
outputs by Gaussian index so results are identical for any worker count.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .scene import Camera, Gaussian3D, Scene

# Minimum splatting opacity: contributions below this never affect a pixel.
ALPHA_LOW = 1.0 / 255.0

# Low-pass dilation added to the diagonal of every projected covariance.
COV_DILATION = 0.3

# Footprint multiplier on sqrt(lambda_max) for the conventional square.
BASE_RADIUS_MULTIPLIER = 3.0

# View positions used for the projection Jacobian are clamped to this
# multiple of the half-frustum tangent.
FOV_CLAMP_FACTOR = 1.3


class CullingMode(enum.Enum):
    BASELINE = "baseline"
    CIRCLE = "circle"
    AABB = "aabb"


@dataclass(frozen=True)
class CullExtent:
    """Half-widths, in pixels, of a Gaussian's rendering footprint."""

    mode: CullingMode
    rx: int
    ry: int


@dataclass(frozen=True)
class EllipseCoefficients:
    """Coefficients of the iso-opacity boundary a*x^2 + b*y^2 + c*x*y + d = 0."""

    a: float
    b: float
    c: float
    d: float


@dataclass(frozen=True, eq=False)
class ProjectedGaussian:
    """Screen-space splat produced by :func:`project_gaussian`."""

    mean2d: np.ndarray          # (2,) pixel coordinates
    cov2d: np.ndarray           # (2, 2) projected covariance, dilated
    conic: np.ndarray           # (3,) inverse covariance (a, b, c), b off-diagonal
    depth: float                # view-space z
    color: np.ndarray           # (3,) RGB in [0, 1]
    opacity: float
    lambda_max: float
    extent: CullExtent


@dataclass(eq=False)
class Projection:
    """Batched preprocessing output, index-aligned with the input scene.

    ``valid[i]`` is False for Gaussians removed before tiling (behind the
    near plane, opacity at or below ``alpha_low`` in circle/aabb modes, or a
    degenerate integer extent); their remaining fields are zeroed.
    """

    mode: CullingMode
    alpha_low: float
    valid: np.ndarray        # (N,) bool
    mean2d: np.ndarray       # (N, 2) float32
    cov2d: np.ndarray        # (N, 3) float32: sxx, syy, sxy
    conic: np.ndarray        # (N, 3) float32: a, b, c
    depth: np.ndarray        # (N,) float32
    color: np.ndarray        # (N, 3) float32
    opacity: np.ndarray      # (N,) float32
    lambda_max: np.ndarray   # (N,) float32
    ext_x: np.ndarray        # (N,) int32 footprint half-width, pixels
    ext_y: np.ndarray        # (N,) int32 footprint half-height, pixels

    def __len__(self) -> int:
        return len(self.valid)

    @property
    def culled_count(self) -> int:
        return int((~self.valid).sum())


# ---------------------------------------------------------------------------
# Spherical harmonics (real basis, degrees 0..3)
# ---------------------------------------------------------------------------

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


def evaluate_sh(coeffs: np.ndarray, direction: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate SH color for one Gaussian seen from ``direction`` (unit vector).

    Returns RGB clamped to [0, 1] after the conventional +0.5 offset.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != ((degree + 1) ** 2, 3):
        raise ValueError(f"expected {(degree + 1) ** 2} coefficient triples for degree {degree}, got {coeffs.shape}")
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    return _evaluate_sh_batch(coeffs[None], direction[None], degree)[0]


def _evaluate_sh_batch(coeffs: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    result = SH_C0 * coeffs[:, 0, :]
    if degree > 0:
        x, y, z = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
        result = result - SH_C1 * y * coeffs[:, 1, :] + SH_C1 * z * coeffs[:, 2, :] - SH_C1 * x * coeffs[:, 3, :]
        if degree > 1:
            xx, yy, zz = x * x, y * y, z * z
            xy, yz, xz = x * y, y * z, x * z
            result = (result
                      + SH_C2[0] * xy * coeffs[:, 4, :]
                      + SH_C2[1] * yz * coeffs[:, 5, :]
                      + SH_C2[2] * (2.0 * zz - xx - yy) * coeffs[:, 6, :]
                      + SH_C2[3] * xz * coeffs[:, 7, :]
                      + SH_C2[4] * (xx - yy) * coeffs[:, 8, :])
            if degree > 2:
                result = (result
                          + SH_C3[0] * y * (3.0 * xx - yy) * coeffs[:, 9, :]
                          + SH_C3[1] * xy * z * coeffs[:, 10, :]
                          + SH_C3[2] * y * (4.0 * zz - xx - yy) * coeffs[:, 11, :]
                          + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * coeffs[:, 12, :]
                          + SH_C3[4] * x * (4.0 * zz - xx - yy) * coeffs[:, 13, :]
                          + SH_C3[5] * z * (xx - yy) * coeffs[:, 14, :]
                          + SH_C3[6] * x * (xx - 3.0 * yy) * coeffs[:, 15, :])
    return np.clip(result + 0.5, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Covariance construction and extents
# ---------------------------------------------------------------------------

def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (..., 4) wxyz to rotation matrices (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    rot = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    rot[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    rot[..., 0, 1] = 2.0 * (x * y - w * z)
    rot[..., 0, 2] = 2.0 * (x * z + w * y)
    rot[..., 1, 0] = 2.0 * (x * y + w * z)
    rot[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    rot[..., 1, 2] = 2.0 * (y * z - w * x)
    rot[..., 2, 0] = 2.0 * (x * z - w * y)
    rot[..., 2, 1] = 2.0 * (y * z + w * x)
    rot[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return rot


def build_covariance3d(scale: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """World covariance R * S * S^T * R^T from per-axis scales and a unit quaternion."""
    scale = np.asarray(scale, dtype=np.float64).reshape(3)
    rotation = np.asarray(rotation, dtype=np.float64).reshape(4)
    if not (np.all(np.isfinite(scale)) and np.all(np.isfinite(rotation))):
        raise ValueError("scale and rotation must be finite")
    if np.any(scale <= 0):
        raise ValueError("scale components must be positive")
    rot = quaternion_to_rotation(rotation)
    m = rot * scale[None, :]
    return m @ m.T


def eigen_extents(cov2d: np.ndarray) -> tuple[float, float]:
    """Eigenvalues (largest, smallest) of a positive-definite symmetric 2x2."""
    cov2d = np.asarray(cov2d, dtype=np.float64)
    sxx, syy, sxy = cov2d[0, 0], cov2d[1, 1], cov2d[0, 1]
    det = sxx * syy - sxy * sxy
    if sxx <= 0 or det <= 0:
        raise ValueError("covariance must be positive definite")
    mid = 0.5 * (sxx + syy)
    disc = math.sqrt(max(mid * mid - det, 0.0))
    return mid + disc, mid - disc


def radius_baseline(lambda_max: float) -> int:
    """Conventional square footprint half-width: ceil(3 * sqrt(lambda_max))."""
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    return math.ceil(BASE_RADIUS_MULTIPLIER * math.sqrt(lambda_max))


def bounding_circle_radius(lambda_max: float, sigma: float, alpha_low: float) -> float:
    """Unclamped radius of the bounding circle of the iso-opacity ellipse.

    Defined for ``sigma > alpha_low``; the caller culls otherwise.
    """
    return math.sqrt(2.0 * lambda_max * math.log(sigma / alpha_low))


def radius_adaptive(lambda_max: float, sigma: float, alpha_low: float) -> int | None:
    """Opacity-bounded circle radius in pixels, or None to cull the Gaussian.

    The real-valued radius is clamped by the real-valued baseline radius
    before rounding up, so the integer result never undercuts either bound.
    """
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    if not 0.0 < alpha_low < 1.0:
        raise ValueError("alpha_low must lie in (0, 1)")
    if sigma <= alpha_low:
        return None
    r_real = min(bounding_circle_radius(lambda_max, sigma, alpha_low),
                 BASE_RADIUS_MULTIPLIER * math.sqrt(lambda_max))
    r = math.ceil(r_real)
    return r if r >= 1 else None


def ellipse_coefficients(cov2d: np.ndarray, sigma: float, alpha_low: float) -> EllipseCoefficients:
    """Quadratic coefficients of the iso-opacity boundary of one splat.

    Points (x, y) relative to the splat center satisfy
    ``a x^2 + b y^2 + c x y + d <= 0`` exactly when the splatting opacity is
    at least ``alpha_low``.
    """
    if sigma <= alpha_low:
        raise ValueError("sigma must exceed alpha_low (the caller culls first)")
    cov2d = np.asarray(cov2d, dtype=np.float64)
    sxx, syy, sxy = cov2d[0, 0], cov2d[1, 1], cov2d[0, 1]
    det = sxx * syy - sxy * sxy
    if sxx <= 0 or det <= 0:
        raise ValueError("covariance must be positive definite")
    log_ratio = math.log(sigma / alpha_low)
    return EllipseCoefficients(a=syy, b=sxx, c=-2.0 * sxy, d=-2.0 * det * log_ratio)


def bounding_box_halfwidths(cov2d: np.ndarray, sigma: float, alpha_low: float) -> tuple[float, float]:
    """Unclamped per-axis half-widths (x_max, y_max) of the iso-opacity ellipse."""
    cov2d = np.asarray(cov2d, dtype=np.float64)
    log_ratio = math.log(sigma / alpha_low)
    return (math.sqrt(2.0 * cov2d[0, 0] * log_ratio),
            math.sqrt(2.0 * cov2d[1, 1] * log_ratio))


def aabb_extents(cov2d: np.ndarray, sigma: float, alpha_low: float,
                 lambda_max: float) -> tuple[int, int] | None:
    """Per-axis footprint half-widths in pixels, or None to cull the Gaussian."""
    if not 0.0 < alpha_low < 1.0:
        raise ValueError("alpha_low must lie in (0, 1)")
    if sigma <= alpha_low:
        return None
    x_max, y_max = bounding_box_halfwidths(cov2d, sigma, alpha_low)
    r_o_real = BASE_RADIUS_MULTIPLIER * math.sqrt(lambda_max)
    rx = math.ceil(min(x_max, r_o_real))
    ry = math.ceil(min(y_max, r_o_real))
    if rx < 1 or ry < 1:
        return None
    return rx, ry


# ---------------------------------------------------------------------------
# Batched preprocessing
# ---------------------------------------------------------------------------

def preprocess(scene: Scene, cam: Camera, mode: CullingMode = CullingMode.AABB,
               alpha_low: float = ALPHA_LOW, dilation: float = COV_DILATION,
               threads: int = 1) -> Projection:
    """Project every Gaussian of a scene and compute its culling extent.

    Outputs are index-aligned with the scene; rows of Gaussians that do not
    survive (near-plane cull, whole-Gaussian opacity cull under circle/aabb,
    degenerate extent) are zeroed and flagged in ``valid``.
    """
    if not 0.0 < alpha_low < 1.0:
        raise ValueError("alpha_low must lie in (0, 1)")
    if dilation < 0:
        raise ValueError("dilation must be non-negative")
    mode = CullingMode(mode)

    arrs = scene.as_arrays()
    n = len(scene)
    out = Projection(
        mode=mode,
        alpha_low=alpha_low,
        valid=np.zeros(n, dtype=bool),
        mean2d=np.zeros((n, 2), dtype=np.float32),
        cov2d=np.zeros((n, 3), dtype=np.float32),
        conic=np.zeros((n, 3), dtype=np.float32),
        depth=np.zeros(n, dtype=np.float32),
        color=np.zeros((n, 3), dtype=np.float32),
        opacity=np.zeros(n, dtype=np.float32),
        lambda_max=np.zeros(n, dtype=np.float32),
        ext_x=np.zeros(n, dtype=np.int32),
        ext_y=np.zeros(n, dtype=np.int32),
    )
    if n == 0:
        return out

    def work(start: int, stop: int) -> None:
        _project_rows(arrs, scene.sh_degree, cam, mode, alpha_low, dilation, out, start, stop)

    if threads <= 1 or n < 2048:
        work(0, n)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda se: work(*se), zip(bounds[:-1], bounds[1:])))
    return out


def _project_rows(arrs, sh_degree: int, cam: Camera, mode: CullingMode,
                  alpha_low: float, dilation: float, out: Projection,
                  start: int, stop: int) -> None:
    centers = arrs.centers[start:stop]
    rot_w2c = cam.rotation
    p_view = centers @ rot_w2c.T + cam.translation
    depth = p_view[:, 2]
    alive = depth > cam.near_plane

    # World covariance R S S^T R^T per Gaussian.
    rot = quaternion_to_rotation(arrs.rotations[start:stop])
    m = rot * arrs.scales[start:stop][:, None, :]
    cov3d = m @ np.swapaxes(m, 1, 2)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        safe_z = np.where(alive, depth, 1.0)
        inv_z = 1.0 / safe_z
        lim_x = FOV_CLAMP_FACTOR * (0.5 * cam.width / cam.fx)
        lim_y = FOV_CLAMP_FACTOR * (0.5 * cam.height / cam.fy)
        tx = np.clip(p_view[:, 0] * inv_z, -lim_x, lim_x) * safe_z
        ty = np.clip(p_view[:, 1] * inv_z, -lim_y, lim_y) * safe_z

        # Rows of J @ W, where J is the 2x3 perspective Jacobian at the
        # clamped view position and W the world-to-camera rotation.
        j0 = cam.fx * inv_z
        j2x = -cam.fx * tx * inv_z * inv_z
        j1 = cam.fy * inv_z
        j2y = -cam.fy * ty * inv_z * inv_z
        t0 = j0[:, None] * rot_w2c[0][None, :] + j2x[:, None] * rot_w2c[2][None, :]
        t1 = j1[:, None] * rot_w2c[1][None, :] + j2y[:, None] * rot_w2c[2][None, :]

        c_t0 = np.matmul(cov3d, t0[:, :, None])[:, :, 0]
        c_t1 = np.matmul(cov3d, t1[:, :, None])[:, :, 0]
        sxx = np.sum(t0 * c_t0, axis=1) + dilation
        syy = np.sum(t1 * c_t1, axis=1) + dilation
        sxy = np.sum(t0 * c_t1, axis=1)

        det = sxx * syy - sxy * sxy
        mid = 0.5 * (sxx + syy)
        disc = np.sqrt(np.maximum(mid * mid - det, 0.0))
        lam_max = mid + disc

        mx = cam.fx * p_view[:, 0] * inv_z + 0.5 * (cam.width - 1)
        my = cam.fy * p_view[:, 1] * inv_z + 0.5 * (cam.height - 1)

        r_o_real = BASE_RADIUS_MULTIPLIER * np.sqrt(np.maximum(lam_max, 0.0))
        sigma = arrs.opacities[start:stop]
        if mode is CullingMode.BASELINE:
            ex = np.ceil(r_o_real)
            ey = ex
        else:
            alive = alive & (sigma > alpha_low)
            log_ratio = np.log(np.maximum(sigma / alpha_low, 1e-300))
            if mode is CullingMode.CIRCLE:
                r_ad = np.sqrt(2.0 * lam_max * log_ratio)
                ex = np.ceil(np.minimum(r_ad, r_o_real))
                ey = ex
            else:
                ex = np.ceil(np.minimum(np.sqrt(2.0 * sxx * log_ratio), r_o_real))
                ey = np.ceil(np.minimum(np.sqrt(2.0 * syy * log_ratio), r_o_real))
        alive = alive & (ex >= 1) & (ey >= 1)

    dirs = centers - cam.center[None, :]
    norms = np.linalg.norm(dirs, axis=1)
    dirs = dirs / np.where(norms > 0, norms, 1.0)[:, None]
    colors = _evaluate_sh_batch(arrs.sh[start:stop], dirs, sh_degree)

    z = ~alive
    sl = slice(start, stop)
    out.valid[sl] = alive
    out.mean2d[sl, 0] = np.where(z, 0.0, mx).astype(np.float32)
    out.mean2d[sl, 1] = np.where(z, 0.0, my).astype(np.float32)
    out.cov2d[sl, 0] = np.where(z, 0.0, sxx).astype(np.float32)
    out.cov2d[sl, 1] = np.where(z, 0.0, syy).astype(np.float32)
    out.cov2d[sl, 2] = np.where(z, 0.0, sxy).astype(np.float32)
    out.conic[sl, 0] = np.where(z, 0.0, syy / det).astype(np.float32)
    out.conic[sl, 1] = np.where(z, 0.0, -sxy / det).astype(np.float32)
    out.conic[sl, 2] = np.where(z, 0.0, sxx / det).astype(np.float32)
    out.depth[sl] = np.where(z, 0.0, depth).astype(np.float32)
    out.color[sl] = np.where(z[:, None], 0.0, colors).astype(np.float32)
    out.opacity[sl] = np.where(z, 0.0, sigma).astype(np.float32)
    out.lambda_max[sl] = np.where(z, 0.0, lam_max).astype(np.float32)
    out.ext_x[sl] = np.where(z, 0, ex).astype(np.int32)
    out.ext_y[sl] = np.where(z, 0, ey).astype(np.int32)


def project_gaussian(g: Gaussian3D, cam: Camera, alpha_low: float = ALPHA_LOW,
                     mode: CullingMode = CullingMode.AABB,
                     dilation: float = COV_DILATION) -> ProjectedGaussian | None:
    """Project a single Gaussian; returns None when it is culled outright."""
    scene = Scene(gaussians=[g], sh_degree=int(round(math.sqrt(len(g.sh_coeffs)))) - 1)
    proj = preprocess(scene, cam, mode=mode, alpha_low=alpha_low, dilation=dilation)
    if not proj.valid[0]:
        return None
    sxx, syy, sxy = (float(v) for v in proj.cov2d[0])
    return ProjectedGaussian(
        mean2d=proj.mean2d[0].astype(np.float64),
        cov2d=np.array([[sxx, sxy], [sxy, syy]]),
        conic=proj.conic[0].astype(np.float64),
        depth=float(proj.depth[0]),
        color=proj.color[0].astype(np.float64),
        opacity=float(proj.opacity[0]),
        lambda_max=float(proj.lambda_max[0]),
        extent=CullExtent(mode=mode, rx=int(proj.ext_x[0]), ry=int(proj.ext_y[0])),
    )
