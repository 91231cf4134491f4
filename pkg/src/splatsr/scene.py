"""Gaussian scene representation, cameras, and parameter transforms.

A scene is a struct-of-arrays collection of anisotropic 3D Gaussians with
unconstrained parameterizations: per-axis log standard deviations for scale,
an (unnormalized) quaternion for orientation, and a pre-sigmoid logit for
opacity. Colors are free RGB values clamped to [0, 1] only at shading time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError

SCENE_MAGIC = "splatsr-scene v1"
CAMERA_MAGIC = "splatsr-cameras v1"

# 17 significant digits round-trips IEEE doubles exactly.
_FMT = "%.17g"


@dataclass
class GaussianParams:
    """Parameters of a single Gaussian (a row view into a scene)."""

    position: np.ndarray       # (3,) world units
    log_scale: np.ndarray      # (3,) log of per-axis stddev
    rotation: np.ndarray       # (4,) quaternion (w, x, y, z), any nonzero norm
    opacity_logit: float
    color: np.ndarray          # (3,) RGB, clamped to [0,1] only at shading


@dataclass
class GaussianScene:
    """Ordered set of Gaussians plus a background color.

    Index identity is stable under every operation except densify/prune.
    """

    positions: np.ndarray      # (N, 3)
    log_scales: np.ndarray     # (N, 3)
    rotations: np.ndarray      # (N, 4) quaternion (w, x, y, z)
    opacity_logits: np.ndarray  # (N,)
    colors: np.ndarray         # (N, 3)
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        self.log_scales = np.atleast_2d(np.asarray(self.log_scales, dtype=np.float64))
        self.rotations = np.atleast_2d(np.asarray(self.rotations, dtype=np.float64))
        self.opacity_logits = np.atleast_1d(
            np.asarray(self.opacity_logits, dtype=np.float64))
        self.colors = np.atleast_2d(np.asarray(self.colors, dtype=np.float64))
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)
        n = self.count
        for name in ("positions", "log_scales", "rotations", "opacity_logits", "colors"):
            arr = getattr(self, name)
            if arr.shape[0] != n and n > 0:
                raise DataError(f"scene field {name} has {arr.shape[0]} rows, expected {n}")

    @property
    def count(self) -> int:
        return 0 if self.positions.size == 0 else self.positions.shape[0]

    @classmethod
    def empty(cls, background=(0.0, 0.0, 0.0)) -> "GaussianScene":
        return cls(
            positions=np.zeros((0, 3)),
            log_scales=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            opacity_logits=np.zeros(0),
            colors=np.zeros((0, 3)),
            background=np.asarray(background, dtype=np.float64),
        )

    def copy(self) -> "GaussianScene":
        return GaussianScene(
            positions=self.positions.copy(),
            log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(),
            opacity_logits=self.opacity_logits.copy(),
            colors=self.colors.copy(),
            background=self.background.copy(),
        )

    def gaussian(self, i: int) -> GaussianParams:
        return GaussianParams(
            position=self.positions[i],
            log_scale=self.log_scales[i],
            rotation=self.rotations[i],
            opacity_logit=float(self.opacity_logits[i]),
            color=self.colors[i],
        )

    def opacities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.opacity_logits))


@dataclass
class Camera:
    """Pinhole camera: world-to-camera extrinsics plus intrinsics declared at
    the reference (HR) resolution."""

    rotation_w2c: np.ndarray    # (3, 3) orthonormal
    translation_w2c: np.ndarray  # (3,)
    focal: tuple                 # (fx, fy) pixels at reference resolution
    principal_point: tuple       # (cx, cy) pixels at reference resolution
    width: int
    height: int
    near_plane: float = 0.01

    def __post_init__(self):
        self.rotation_w2c = np.asarray(self.rotation_w2c, dtype=np.float64).reshape(3, 3)
        self.translation_w2c = np.asarray(self.translation_w2c, dtype=np.float64).reshape(3)
        err = np.abs(self.rotation_w2c.T @ self.rotation_w2c - np.eye(3)).max()
        if err > 1e-9:
            raise DataError(f"camera rotation not orthonormal (deviation {err:.3e})")
        if self.near_plane <= 0:
            raise DataError("near_plane must be positive")
        if self.width < 1 or self.height < 1:
            raise DataError("camera dimensions must be >= 1")

    def scaled(self, scale: float):
        """Effective intrinsics and dims at render scale ``scale``.

        The +0.5/-0.5 shift keeps pixel centers aligned across scales
        (pixel p covers [p-0.5, p+0.5] with its center at integer p).
        """
        if scale <= 0:
            raise UsageError("render scale must be positive")
        fx, fy = self.focal
        cx, cy = self.principal_point
        w = int(round(self.width * scale))
        h = int(round(self.height * scale))
        return (fx * scale, fy * scale,
                (cx + 0.5) * scale - 0.5, (cy + 0.5) * scale - 0.5,
                w, h)

    def center_world(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation_w2c.T @ self.translation_w2c


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a quaternion (w, x, y, z), normalized internally.

    Raises on a (near-)zero quaternion, which has no defined rotation.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise UsageError("zero quaternion is a degenerate rotation")
    w, x, y, z = q / norm
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def covariance_from_params(log_scale: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Sigma = R diag(exp(2 s)) R^T; symmetric positive definite by construction."""
    R = quat_to_rotation(rotation)
    d = np.exp(2.0 * np.asarray(log_scale, dtype=np.float64))
    return (R * d) @ R.T


def quats_to_rotations(q: np.ndarray) -> np.ndarray:
    """Vectorized quaternion (N,4) -> rotation matrices (N,3,3)."""
    q = np.asarray(q, dtype=np.float64)
    norms = np.linalg.norm(q, axis=1)
    if np.any(norms < 1e-12):
        raise UsageError("zero quaternion is a degenerate rotation")
    w, x, y, z = (q / norms[:, None]).T
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - z * w)
    R[:, 0, 2] = 2 * (x * z + y * w)
    R[:, 1, 0] = 2 * (x * y + z * w)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - x * w)
    R[:, 2, 0] = 2 * (x * z - y * w)
    R[:, 2, 1] = 2 * (y * z + x * w)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def init_scene_random(count: int, bounds, seed: int,
                      background=(0.0, 0.0, 0.0)) -> GaussianScene:
    """Seeded random scene: uniform positions in an axis-aligned box.

    Initial scale is box_diagonal / count^(1/3) / 4 per axis, i.e. roughly
    the inter-Gaussian spacing; opacity starts at 0.5.
    """
    if count < 1:
        raise UsageError("count must be >= 1")
    lo = np.asarray(bounds[0], dtype=np.float64).reshape(3)
    hi = np.asarray(bounds[1], dtype=np.float64).reshape(3)
    if np.any(hi <= lo):
        raise UsageError("bounds box is degenerate")
    rng = np.random.default_rng(seed)
    positions = rng.uniform(lo, hi, size=(count, 3))
    diag = float(np.linalg.norm(hi - lo))
    sigma = diag / count ** (1.0 / 3.0) / 4.0
    log_scales = np.full((count, 3), np.log(sigma))
    rotations = np.zeros((count, 4))
    rotations[:, 0] = 1.0
    opacity_logits = np.zeros(count)  # logit(0.5)
    colors = rng.uniform(0.0, 1.0, size=(count, 3))
    return GaussianScene(positions, log_scales, rotations, opacity_logits,
                         colors, np.asarray(background, dtype=np.float64))


def save_scene(scene: GaussianScene, path) -> None:
    lines = [SCENE_MAGIC,
             "%d %s %s %s" % ((scene.count,) + tuple(_FMT % v for v in scene.background))]
    for i in range(scene.count):
        row = np.concatenate([
            scene.positions[i], scene.log_scales[i], scene.rotations[i],
            [scene.opacity_logits[i]], scene.colors[i]])
        lines.append(" ".join(_FMT % v for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_scene(path) -> GaussianScene:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != SCENE_MAGIC:
        raise DataError(f"{path}: missing scene header {SCENE_MAGIC!r}")
    try:
        header = lines[1].split()
        count = int(header[0])
        background = np.array([float(v) for v in header[1:4]])
    except (IndexError, ValueError) as e:
        raise DataError(f"{path}: bad scene header line 2: {e}") from e
    if len(lines) < 2 + count:
        raise DataError(f"{path}: truncated scene file, expected {count} records, "
                        f"got {len(lines) - 2}")
    if count == 0:
        return GaussianScene.empty(background)
    rows = np.empty((count, 14))
    for i in range(count):
        parts = lines[2 + i].split()
        if len(parts) != 14:
            raise DataError(f"{path}: line {3 + i}: expected 14 fields, got {len(parts)}")
        try:
            rows[i] = [float(v) for v in parts]
        except ValueError as e:
            raise DataError(f"{path}: line {3 + i}: {e}") from e
    return GaussianScene(
        positions=rows[:, 0:3], log_scales=rows[:, 3:6], rotations=rows[:, 6:10],
        opacity_logits=rows[:, 10], colors=rows[:, 11:14], background=background)


def save_cameras(cameras, path) -> None:
    lines = [CAMERA_MAGIC, str(len(cameras))]
    for i, cam in enumerate(cameras):
        lines.append(f"view {i}")
        lines.append("rotation_w2c " + " ".join(_FMT % v for v in cam.rotation_w2c.ravel()))
        lines.append("translation_w2c " + " ".join(_FMT % v for v in cam.translation_w2c))
        lines.append("focal " + " ".join(_FMT % v for v in cam.focal))
        lines.append("principal_point " + " ".join(_FMT % v for v in cam.principal_point))
        lines.append(f"size {cam.width} {cam.height}")
        lines.append("near_plane " + _FMT % cam.near_plane)
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_cameras(path):
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines or lines[0] != CAMERA_MAGIC:
        raise DataError(f"{path}: missing camera header {CAMERA_MAGIC!r}")
    try:
        count = int(lines[1])
    except ValueError as e:
        raise DataError(f"{path}: bad camera count: {e}") from e
    cameras = []
    pos = 2
    for _ in range(count):
        try:
            rec = {}
            for _ in range(7):
                key, *vals = lines[pos].split()
                rec[key] = vals
                pos += 1
            cameras.append(Camera(
                rotation_w2c=np.array([float(v) for v in rec["rotation_w2c"]]).reshape(3, 3),
                translation_w2c=np.array([float(v) for v in rec["translation_w2c"]]),
                focal=tuple(float(v) for v in rec["focal"]),
                principal_point=tuple(float(v) for v in rec["principal_point"]),
                width=int(rec["size"][0]), height=int(rec["size"][1]),
                near_plane=float(rec["near_plane"][0]),
            ))
        except (IndexError, KeyError, ValueError) as e:
            raise DataError(f"{path}: malformed camera record near line {pos + 1}: {e}") from e
    return cameras


def scenes_equal(a: GaussianScene, b: GaussianScene) -> bool:
    """Bit-exact equality on every field."""
    return (a.count == b.count
            and np.array_equal(a.positions, b.positions)
            and np.array_equal(a.log_scales, b.log_scales)
            and np.array_equal(a.rotations, b.rotations)
            and np.array_equal(a.opacity_logits, b.opacity_logits)
            and np.array_equal(a.colors, b.colors)
            and np.array_equal(a.background, b.background))
