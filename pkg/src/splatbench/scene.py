"""Scene model: anisotropic 3D Gaussian primitives, cameras, and scene I/O.

A scene is an ordered list of Gaussians. The position of a Gaussian in that
list is its identity; all downstream tie-breaking (pair sorting, blending
order for equal depths) refers to this index, which is what makes renders
deterministic. Scenes are immutable after loading and safe to share between
threads.

Two interchange formats are supported:

* binary little-endian PLY in the de-facto splat checkpoint layout: opacity
  stored as a logit, per-axis scales as logs, color as spherical-harmonics
  coefficients split into a DC triple (``f_dc_*``) and channel-major
  higher-order rest (``f_rest_*``);
* a plain JSON format storing activated values directly, intended for
  hand-written fixtures.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .errors import SceneFormatError, SceneValidationError

# Degree-0 real spherical-harmonics constant; DC coefficients encode
# color via rgb = C0 * dc + 0.5.
SH_C0 = 0.28209479177387814

MAX_SH_DEGREE = 3

_QUAT_NORM_TOL = 1e-6
_ROTATION_ORTHO_TOL = 1e-5


@dataclass(eq=False)
class Gaussian3D:
    """One anisotropic 3D Gaussian primitive.

    Attributes
    ----------
    center : ndarray of shape (3,)
        World-space mean.
    scale : ndarray of shape (3,)
        Per-axis standard deviations, strictly positive.
    rotation : ndarray of shape (4,)
        Unit quaternion (w, x, y, z) orienting the principal axes.
    opacity : float
        Base opacity in (0, 1].
    sh_coeffs : ndarray of shape ((deg + 1) ** 2, 3)
        Spherical-harmonics color coefficients, DC first.
    """

    center: np.ndarray
    scale: np.ndarray
    rotation: np.ndarray
    opacity: float
    sh_coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.opacity = float(self.opacity)
        self.sh_coeffs = np.asarray(self.sh_coeffs, dtype=np.float64).reshape(-1, 3)


@dataclass(eq=False)
class Scene:
    """Ordered collection of Gaussians with a common SH degree."""

    gaussians: list[Gaussian3D]
    sh_degree: int = 0

    def __len__(self) -> int:
        return len(self.gaussians)

    def as_arrays(self) -> SceneArrays:
        """Stack per-Gaussian fields into dense arrays (index order preserved)."""
        n = len(self.gaussians)
        k = (self.sh_degree + 1) ** 2
        if n == 0:
            return SceneArrays(
                centers=np.zeros((0, 3)),
                scales=np.zeros((0, 3)),
                rotations=np.zeros((0, 4)),
                opacities=np.zeros(0),
                sh=np.zeros((0, k, 3)),
            )
        return SceneArrays(
            centers=np.stack([g.center for g in self.gaussians]),
            scales=np.stack([g.scale for g in self.gaussians]),
            rotations=np.stack([g.rotation for g in self.gaussians]),
            opacities=np.array([g.opacity for g in self.gaussians]),
            sh=np.stack([g.sh_coeffs for g in self.gaussians]),
        )


class SceneArrays(NamedTuple):
    centers: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    sh: np.ndarray


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera with a world-to-camera transform.

    View-space +z is the viewing direction; a point at view-space (x, y, z)
    lands at pixel (fx * x / z + (width - 1) / 2, fy * y / z + (height - 1) / 2),
    so pixel centers sit at integer coordinates.
    """

    view_matrix: np.ndarray
    fx: float
    fy: float
    width: int
    height: int
    near_plane: float = 0.2
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        vm = np.asarray(self.view_matrix, dtype=np.float64).reshape(4, 4)
        object.__setattr__(self, "view_matrix", vm)
        rot = vm[:3, :3]
        if not np.allclose(rot @ rot.T, np.eye(3), atol=_ROTATION_ORTHO_TOL):
            raise ValueError("view_matrix rotation block is not orthonormal")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.near_plane <= 0:
            raise ValueError("near_plane must be positive")
        bg = tuple(float(c) for c in self.background)
        if len(bg) != 3 or any(not (0.0 <= c <= 1.0) for c in bg):
            raise ValueError("background must be an RGB triple in [0, 1]")
        object.__setattr__(self, "background", bg)

    @property
    def rotation(self) -> np.ndarray:
        return self.view_matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.view_matrix[:3, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def from_lookat(
        cls,
        position,
        target,
        up=(0.0, 1.0, 0.0),
        fov_y_deg: float = 60.0,
        width: int = 256,
        height: int = 256,
        near_plane: float = 0.2,
        background=(0.0, 0.0, 0.0),
    ) -> Camera:
        """Build a camera from a look-at description with square pixels."""
        position = np.asarray(position, dtype=np.float64).reshape(3)
        target = np.asarray(target, dtype=np.float64).reshape(3)
        up = np.asarray(up, dtype=np.float64).reshape(3)
        forward = target - position
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("camera position and target coincide")
        z_axis = forward / norm
        x_axis = np.cross(up, z_axis)
        norm = np.linalg.norm(x_axis)
        if norm < 1e-12:
            raise ValueError("up vector is parallel to the view direction")
        x_axis /= norm
        y_axis = np.cross(z_axis, x_axis)
        rot = np.stack([x_axis, y_axis, z_axis])
        vm = np.eye(4)
        vm[:3, :3] = rot
        vm[:3, 3] = -rot @ position
        fy = 0.5 * height / math.tan(math.radians(fov_y_deg) / 2.0)
        return cls(
            view_matrix=vm,
            fx=fy,
            fy=fy,
            width=int(width),
            height=int(height),
            near_plane=near_plane,
            background=background,
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Distribution parameters for the seeded synthetic-scene generator."""

    extent: float = 1.0
    scale_range: tuple[float, float] = (0.02, 0.08)
    anisotropy_range: tuple[float, float] = (1.0, 4.0)
    opacity_range: tuple[float, float] = (0.05, 0.95)


@dataclass(frozen=True)
class SceneDiagnostic:
    """One invariant violation found by :func:`validate_scene`."""

    index: int
    field: str
    message: str


def normalize_quaternion(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if not np.isfinite(norm) or norm < 1e-12:
        raise SceneValidationError("cannot normalize zero or non-finite quaternion")
    return q / norm


def generate_synthetic(seed: int, count: int, spec: SyntheticSpec | None = None) -> Scene:
    """Generate a deterministic synthetic degree-0 scene.

    The result is a pure function of ``(seed, count, spec)``: positions are
    uniform in a cube of half-width ``spec.extent``, one randomly chosen axis
    of each Gaussian is stretched by a ratio drawn from
    ``spec.anisotropy_range``, and orientations are uniform random rotations.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)

    centers = rng.uniform(-spec.extent, spec.extent, size=(count, 3))
    base = rng.uniform(spec.scale_range[0], spec.scale_range[1], size=count)
    ratios = rng.uniform(spec.anisotropy_range[0], spec.anisotropy_range[1], size=count)
    major_axes = rng.integers(0, 3, size=count)
    scales = np.repeat(base[:, None], 3, axis=1)
    scales[np.arange(count), major_axes] *= ratios

    quats = rng.normal(size=(count, 4))
    norms = np.linalg.norm(quats, axis=1)
    degenerate = norms < 1e-12
    quats[degenerate] = (1.0, 0.0, 0.0, 0.0)
    norms[degenerate] = 1.0
    quats /= norms[:, None]

    opacities = rng.uniform(spec.opacity_range[0], spec.opacity_range[1], size=count)
    rgb = rng.uniform(0.0, 1.0, size=(count, 3))
    dc = (rgb - 0.5) / SH_C0

    gaussians = [
        Gaussian3D(
            center=centers[i],
            scale=scales[i],
            rotation=quats[i],
            opacity=opacities[i],
            sh_coeffs=dc[i][None, :],
        )
        for i in range(count)
    ]
    return Scene(gaussians=gaussians, sh_degree=0)


def validate_scene(scene: Scene) -> list[SceneDiagnostic]:
    """Check the per-Gaussian invariants, returning one diagnostic each.

    Returns an empty list for a valid scene; never raises.
    """
    out: list[SceneDiagnostic] = []
    if not 0 <= scene.sh_degree <= MAX_SH_DEGREE:
        out.append(SceneDiagnostic(-1, "sh_degree", f"sh_degree {scene.sh_degree} outside 0..{MAX_SH_DEGREE}"))
        return out
    expected_k = (scene.sh_degree + 1) ** 2
    for i, g in enumerate(scene.gaussians):
        if not np.all(np.isfinite(g.center)):
            out.append(SceneDiagnostic(i, "center", "non-finite center"))
        if not np.all(np.isfinite(g.scale)) or np.any(g.scale <= 0):
            out.append(SceneDiagnostic(i, "scale", "scale components must be finite and > 0"))
        qnorm = float(np.linalg.norm(g.rotation))
        if not math.isfinite(qnorm) or abs(qnorm - 1.0) > _QUAT_NORM_TOL:
            out.append(SceneDiagnostic(i, "rotation", f"quaternion norm {qnorm!r} not within {_QUAT_NORM_TOL} of 1"))
        if not math.isfinite(g.opacity) or not 0.0 < g.opacity <= 1.0:
            out.append(SceneDiagnostic(i, "opacity", f"opacity {g.opacity!r} outside (0, 1]"))
        if g.sh_coeffs.shape != (expected_k, 3):
            out.append(SceneDiagnostic(i, "sh_coeffs", f"expected shape ({expected_k}, 3), got {g.sh_coeffs.shape}"))
        elif not np.all(np.isfinite(g.sh_coeffs)):
            out.append(SceneDiagnostic(i, "sh_coeffs", "non-finite SH coefficient"))
    return out


# ---------------------------------------------------------------------------
# PLY checkpoint format
# ---------------------------------------------------------------------------

_REST_COUNT_TO_DEGREE = {0: 0, 9: 1, 24: 2, 45: 3}


def _ply_property_names(sh_degree: int) -> list[str]:
    rest = 3 * ((sh_degree + 1) ** 2 - 1)
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


def load_ply(path) -> Scene:
    """Load a binary little-endian PLY splat checkpoint.

    Raw fields are de-activated on load: ``opacity = logistic(raw)``,
    ``scale = exp(raw)`` per axis, quaternions are normalized, and SH
    coefficients are assembled DC-first from the channel-major rest block.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()

    end = blob.find(b"end_header\n")
    if end < 0:
        raise SceneFormatError(f"{path}: no end_header marker")
    header_lines = blob[:end].decode("ascii", errors="replace").splitlines()
    body = blob[end + len(b"end_header\n"):]

    if not header_lines or header_lines[0].strip() != "ply":
        raise SceneFormatError(f"{path}: missing 'ply' magic")
    fmt_lines = [ln for ln in header_lines if ln.startswith("format")]
    if not fmt_lines or fmt_lines[0].split()[1] != "binary_little_endian":
        raise SceneFormatError(f"{path}: format must be binary_little_endian")

    count = None
    names: list[str] = []
    for ln in header_lines:
        parts = ln.split()
        if not parts:
            continue
        if parts[0] == "element" and parts[1] == "vertex":
            count = int(parts[2])
        elif parts[0] == "property":
            if parts[1] != "float":
                raise SceneFormatError(f"{path}: unsupported property type {parts[1]!r}")
            names.append(parts[2])
    if count is None:
        raise SceneFormatError(f"{path}: missing 'element vertex' declaration")

    rest_count = sum(1 for n in names if n.startswith("f_rest_"))
    if rest_count not in _REST_COUNT_TO_DEGREE:
        raise SceneFormatError(f"{path}: unsupported f_rest property count {rest_count}")
    sh_degree = _REST_COUNT_TO_DEGREE[rest_count]

    required = _ply_property_names(sh_degree)
    col = {n: i for i, n in enumerate(names)}
    for name in required:
        if name not in col:
            raise SceneFormatError(f"{path}: missing property '{name}'")

    data = np.frombuffer(body, dtype="<f4", count=count * len(names)).reshape(count, len(names))
    data = data.astype(np.float64)
    bad = ~np.isfinite(data).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise SceneValidationError(f"{path}: non-finite value in element {idx}")

    centers = data[:, [col["x"], col["y"], col["z"]]]
    raw_opacity = data[:, col["opacity"]]
    raw_scale = data[:, [col["scale_0"], col["scale_1"], col["scale_2"]]]
    quats = data[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]]

    k = (sh_degree + 1) ** 2
    sh = np.zeros((count, k, 3))
    sh[:, 0, :] = data[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]]
    k_rest = k - 1
    for c in range(3):
        for j in range(k_rest):
            sh[:, 1 + j, c] = data[:, col[f"f_rest_{c * k_rest + j}"]]

    opacities = expit(raw_opacity)
    scales = np.exp(raw_scale)
    qnorms = np.linalg.norm(quats, axis=1)
    zero_q = qnorms < 1e-12
    if zero_q.any():
        idx = int(np.flatnonzero(zero_q)[0])
        raise SceneValidationError(f"{path}: zero-norm quaternion in element {idx}")
    quats = quats / qnorms[:, None]

    gaussians = [
        Gaussian3D(centers[i], scales[i], quats[i], opacities[i], sh[i])
        for i in range(count)
    ]
    return Scene(gaussians=gaussians, sh_degree=sh_degree)


def save_ply(scene: Scene, path) -> None:
    """Write a scene as a binary little-endian PLY splat checkpoint.

    Opacity is stored as a logit; to keep the logit finite, opacities are
    clipped to [1e-7, 1 - 1e-7] before encoding (round-trip error below the
    1e-6 interchange tolerance). Normals are written as zeros.
    """
    path = Path(path)
    arrs = scene.as_arrays()
    n = len(scene)
    names = _ply_property_names(scene.sh_degree)
    k_rest = (scene.sh_degree + 1) ** 2 - 1

    out = np.zeros((n, len(names)), dtype=np.float64)
    col = {nm: i for i, nm in enumerate(names)}
    if n:
        out[:, [col["x"], col["y"], col["z"]]] = arrs.centers
        out[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]] = arrs.sh[:, 0, :]
        for c in range(3):
            for j in range(k_rest):
                out[:, col[f"f_rest_{c * k_rest + j}"]] = arrs.sh[:, 1 + j, c]
        sigma = np.clip(arrs.opacities, 1e-7, 1.0 - 1e-7)
        out[:, col["opacity"]] = np.log(sigma / (1.0 - sigma))
        out[:, [col["scale_0"], col["scale_1"], col["scale_2"]]] = np.log(arrs.scales)
        out[:, [col["rot_0"], col["rot_1"], col["rot_2"], col["rot_3"]]] = arrs.rotations

    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header += [f"property float {nm}" for nm in names]
    header.append("end_header")
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(out.astype("<f4").tobytes())


# ---------------------------------------------------------------------------
# JSON fixture format
# ---------------------------------------------------------------------------

def load_json(path) -> Scene:
    """Load the plain JSON scene format (activated values, quaternions normalized)."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: invalid JSON ({exc})") from exc

    if not isinstance(doc, dict) or "gaussians" not in doc:
        raise SceneFormatError(f"{path}: missing top-level 'gaussians'")
    sh_degree = int(doc.get("sh_degree", 0))
    if not 0 <= sh_degree <= MAX_SH_DEGREE:
        raise SceneFormatError(f"{path}: sh_degree {sh_degree} outside 0..{MAX_SH_DEGREE}")
    k = (sh_degree + 1) ** 2

    gaussians = []
    for i, item in enumerate(doc["gaussians"]):
        try:
            g = Gaussian3D(
                center=np.array(item["center"], dtype=np.float64),
                scale=np.array(item["scale"], dtype=np.float64),
                rotation=normalize_quaternion(np.array(item["rotation"], dtype=np.float64)),
                opacity=float(item["opacity"]),
                sh_coeffs=np.array(item["sh"], dtype=np.float64),
            )
        except (KeyError, TypeError) as exc:
            raise SceneFormatError(f"{path}: malformed gaussian {i} ({exc})") from exc
        if g.sh_coeffs.shape != (k, 3):
            raise SceneFormatError(f"{path}: gaussian {i} sh shape {g.sh_coeffs.shape} != ({k}, 3)")
        for fieldname, value in (("center", g.center), ("scale", g.scale), ("rotation", g.rotation), ("sh", g.sh_coeffs)):
            if not np.all(np.isfinite(value)):
                raise SceneValidationError(f"{path}: non-finite {fieldname} in gaussian {i}")
        if not math.isfinite(g.opacity):
            raise SceneValidationError(f"{path}: non-finite opacity in gaussian {i}")
        gaussians.append(g)
    return Scene(gaussians=gaussians, sh_degree=sh_degree)


def save_json(scene: Scene, path) -> None:
    doc = {
        "sh_degree": scene.sh_degree,
        "gaussians": [
            {
                "center": g.center.tolist(),
                "scale": g.scale.tolist(),
                "rotation": g.rotation.tolist(),
                "opacity": g.opacity,
                "sh": g.sh_coeffs.tolist(),
            }
            for g in scene.gaussians
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_scene(path) -> Scene:
    """Dispatch on file suffix (.ply or .json)."""
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return load_ply(path)
    if path.suffix.lower() == ".json":
        return load_json(path)
    raise SceneFormatError(f"{path}: unknown scene format (expected .ply or .json)")


def save_scene(scene: Scene, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        save_ply(scene, path)
    elif path.suffix.lower() == ".json":
        save_json(scene, path)
    else:
        raise SceneFormatError(f"{path}: unknown scene format (expected .ply or .json)")
