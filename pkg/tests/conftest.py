"""Shared fixtures: smooth randomized render configurations for finite
difference checks, plus FD helpers.

The finite-difference configs are constructed so the rendering function is
smooth in a neighborhood of the sample point: every footprint covers the
whole image with margin (so the radius cutoff and the per-splat alpha floor
are never crossed), per-splat alphas stay well inside (alpha_min, alpha_max),
accumulated transmittance stays above the early-stop threshold, raw colors
stay inside the clamp interval, and depths are separated so the global sort
order is stable under perturbation.
"""

import numpy as np
import pytest

from splatsr.harness import _looking_at_camera
from splatsr.scene import Camera, GaussianScene

FD_EPS = 1e-5


def make_camera(size=16, focal_frac=0.8, position=(0.0, 0.0, -4.0),
                target=(0.0, 0.0, 0.0)):
    return _looking_at_camera(np.asarray(position, dtype=np.float64),
                              np.asarray(target, dtype=np.float64),
                              size, size, focal_frac * size)


def smooth_render_config(rng, size=16, max_gaussians=5):
    """(scene, camera) pair on which the renderer is locally smooth."""
    n = int(rng.integers(1, max_gaussians + 1))
    # Camera on a jittered sphere around the origin, looking near the origin.
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = rng.uniform(3.7, 4.3)
    cam = _looking_at_camera(direction * radius, rng.uniform(-0.1, 0.1, 3),
                             size, size, 0.8 * size)
    # Positions near the origin with enforced depth separation along the view
    # axis so infinitesimal perturbations cannot reorder the global sort.
    base = rng.uniform(-0.3, 0.3, size=(n, 3))
    view_dir = -direction
    offsets = (np.arange(n) - (n - 1) / 2.0) * 0.25
    positions = base - np.outer(base @ view_dir, view_dir) \
        + np.outer(offsets, view_dir)
    # World-space sigmas large enough that 3-sigma footprints cover the image
    # and the per-pixel alpha never falls near the 1/255 floor.
    log_scales = np.log(rng.uniform(1.7, 2.6, size=(n, 3)))
    quats = rng.normal(size=(n, 4))
    quats /= np.linalg.norm(quats, axis=1, keepdims=True)
    # Peak alphas in [0.35, 0.7]: away from both clamp levels, and with
    # n <= 5 the transmittance floor 0.3^5 stays above the stop threshold.
    alphas = rng.uniform(0.35, 0.7, size=n)
    logits = np.log(alphas / (1.0 - alphas))
    colors = rng.uniform(0.15, 0.85, size=(n, 3))
    background = rng.uniform(0.1, 0.9, size=3)
    scene = GaussianScene(positions, log_scales, quats, logits, colors,
                          background)
    return scene, cam


PARAM_FIELDS = ("positions", "log_scales", "rotations", "opacity_logits",
                "colors")


def fd_scene_grad(scene, scalar_fn, eps=FD_EPS):
    """Central finite differences of scalar_fn(scene) over every Gaussian
    parameter. Returns {field_name: array matching the field's shape}."""
    out = {}
    for name in PARAM_FIELDS:
        arr = getattr(scene, name)
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            hi = scalar_fn(scene)
            flat[j] = orig - eps
            lo = scalar_fn(scene)
            flat[j] = orig
            gflat[j] = (hi - lo) / (2.0 * eps)
        out[name] = g
    return out


def assert_grads_close(analytic, fd, rel=1e-3, absolute=1e-6, label=""):
    diff = np.abs(analytic - fd)
    tol = np.maximum(absolute, rel * np.abs(fd))
    if not np.all(diff <= tol):
        worst = np.unravel_index(np.argmax(diff - tol), diff.shape)
        raise AssertionError(
            f"{label}{worst}: analytic={analytic[worst]:.10g} "
            f"fd={fd[worst]:.10g} diff={diff[worst]:.3e} tol={tol[worst]:.3e}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
