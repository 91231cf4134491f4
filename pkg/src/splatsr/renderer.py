"""Differentiable splatting renderer.

Projection follows the EWA local-affine model: a Gaussian's 2D footprint is
J W Sigma W^T J^T with J the perspective Jacobian at the mean, plus a 0.3 px
low-pass dilation on the diagonal. Compositing is exact per pixel,
front-to-back over a global depth sort (ties broken by source index), with
the community-standard cutoffs: 3-sigma footprint radius, per-splat alpha
floor 1/255, alpha cap 0.999, and per-pixel early stop at transmittance 1e-4.

The backward pass is the analytic adjoint of the same compositing, obtained
by re-traversing each pixel back-to-front; it is exact with respect to the
rendered function (the finite-difference tests in the suite check exactly
that).

Everything is serial and index-ordered, so renders and gradients are
bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import UsageError
from .scene import Camera, GaussianScene, quats_to_rotations

ALPHA_MIN = 1.0 / 255.0
ALPHA_MAX = 0.999
T_STOP = 1e-4
LOWPASS = 0.3
RADIUS_SIGMAS = 3.0


@dataclass
class ProjectedGaussians:
    """Screen-space Gaussians retained after near-plane culling (SoA)."""

    mean2d: np.ndarray    # (M, 2) pixels
    cov2d: np.ndarray     # (M, 3) upper triangle (a, b, c) of [[a, b], [b, c]]
    cov2d_inv: np.ndarray  # (M, 3) upper triangle of the inverse
    depth: np.ndarray     # (M,) camera-space z
    color: np.ndarray     # (M, 3) shaded (clamped) color
    opacity: np.ndarray   # (M,) sigmoid(opacity_logit)
    radius: np.ndarray    # (M,) pixels, 3 * sqrt(max eigenvalue)
    source_index: np.ndarray  # (M,) index into the scene's Gaussian list


@dataclass
class RenderGradients:
    """Per-Gaussian parameter gradients, index-aligned with the scene."""

    d_position: np.ndarray       # (N, 3)
    d_log_scale: np.ndarray      # (N, 3)
    d_rotation: np.ndarray       # (N, 4)
    d_opacity_logit: np.ndarray  # (N,)
    d_color: np.ndarray          # (N, 3)
    # ||dL/dmean2d|| in half-viewport units, the densification statistic.
    mean2d_grad_norm: np.ndarray  # (N,)
    visible: np.ndarray          # (N,) bool: retained by projection

    @classmethod
    def zeros(cls, n: int) -> "RenderGradients":
        return cls(np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 4)),
                   np.zeros(n), np.zeros((n, 3)), np.zeros(n),
                   np.zeros(n, dtype=bool))

    def assert_finite(self):
        for arr in (self.d_position, self.d_log_scale, self.d_rotation,
                    self.d_opacity_logit, self.d_color):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError("non-finite render gradient")


def project(scene: GaussianScene, camera: Camera, scale: float) -> ProjectedGaussians:
    """Project a scene into screen space at render scale ``scale``."""
    fx, fy, cx, cy, _, _ = camera.scaled(scale)
    n = scene.count
    if n == 0:
        z = np.zeros(0)
        return ProjectedGaussians(np.zeros((0, 2)), np.zeros((0, 3)), np.zeros((0, 3)),
                                  z, np.zeros((0, 3)), z, z, np.zeros(0, dtype=np.int64))
    W = camera.rotation_w2c
    pc = scene.positions @ W.T + camera.translation_w2c  # camera space
    keep = pc[:, 2] > camera.near_plane
    idx = np.nonzero(keep)[0]
    pc = pc[idx]
    x, y, z = pc.T

    mean2d = np.stack([fx * x / z + cx, fy * y / z + cy], axis=1)

    R = quats_to_rotations(scene.rotations[idx])
    d = np.exp(2.0 * scene.log_scales[idx])
    sigma = np.einsum("nij,nj,nkj->nik", R, d, R)  # R diag(d) R^T

    J = np.zeros((len(idx), 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * x / z ** 2
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * y / z ** 2
    M3 = J @ W
    cov_full = np.einsum("nij,njk,nlk->nil", M3, sigma, M3)
    a = cov_full[:, 0, 0] + LOWPASS
    b = cov_full[:, 0, 1]
    c = cov_full[:, 1, 1] + LOWPASS
    det = a * c - b * b
    lam_max = 0.5 * (a + c) + np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    radius = RADIUS_SIGMAS * np.sqrt(lam_max)

    cov2d = np.stack([a, b, c], axis=1)
    cov2d_inv = np.stack([c / det, -b / det, a / det], axis=1)
    color = np.clip(scene.colors[idx], 0.0, 1.0)
    opacity = 1.0 / (1.0 + np.exp(-scene.opacity_logits[idx]))
    return ProjectedGaussians(mean2d, cov2d, cov2d_inv, z.copy(), color,
                              opacity, radius, idx)


def _depth_sorted(proj: ProjectedGaussians) -> np.ndarray:
    # Lexsort: primary key depth, source index breaks ties -> total order.
    return np.lexsort((proj.source_index, proj.depth))


@numba.njit(cache=True)
def _forward_kernel(mean2d, cinv, opacity, color, radius, background, height, width):
    m = mean2d.shape[0]
    image = np.zeros((height, width, 3))
    trans = np.ones((height, width))
    weight_sum = np.zeros((height, width))
    last_rank = np.zeros((height, width), dtype=np.int32)
    for i in range(m):
        mx, my = mean2d[i, 0], mean2d[i, 1]
        r = radius[i]
        x0 = max(int(np.ceil(mx - r)), 0)
        x1 = min(int(np.floor(mx + r)), width - 1)
        y0 = max(int(np.ceil(my - r)), 0)
        y1 = min(int(np.floor(my + r)), height - 1)
        ia, ib, ic = cinv[i, 0], cinv[i, 1], cinv[i, 2]
        for py in range(y0, y1 + 1):
            dy = py - my
            for px in range(x0, x1 + 1):
                dx = px - mx
                if dx * dx + dy * dy > r * r:
                    continue
                t = trans[py, px]
                if t < T_STOP:
                    continue
                q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
                a = opacity[i] * np.exp(-0.5 * q)
                if a > ALPHA_MAX:
                    a = ALPHA_MAX
                if a < ALPHA_MIN:
                    continue
                w = a * t
                image[py, px, 0] += w * color[i, 0]
                image[py, px, 1] += w * color[i, 1]
                image[py, px, 2] += w * color[i, 2]
                weight_sum[py, px] += w
                trans[py, px] = t * (1.0 - a)
                last_rank[py, px] = i + 1
    for py in range(height):
        for px in range(width):
            t = trans[py, px]
            image[py, px, 0] += t * background[0]
            image[py, px, 1] += t * background[1]
            image[py, px, 2] += t * background[2]
    return image, trans, weight_sum, last_rank


@numba.njit(cache=True)
def _backward_kernel(mean2d, cinv, opacity, color, radius, background,
                     upstream, trans_final, last_rank):
    """Adjoint of the compositing loop, traversed back-to-front.

    Returns gradients w.r.t. screen-space quantities: mean2d, the inverse
    2D covariance triple, opacity (post-sigmoid), and shaded color.
    """
    m = mean2d.shape[0]
    height, width = trans_final.shape
    g_mean = np.zeros((m, 2))
    g_cinv = np.zeros((m, 3))
    g_alpha = np.zeros(m)
    g_color = np.zeros((m, 3))
    # Per-pixel running state: transmittance just after the current Gaussian
    # in forward order, and the color accumulated behind it (incl. background).
    t_after = trans_final.copy()
    s_r = trans_final * background[0]
    s_g = trans_final * background[1]
    s_b = trans_final * background[2]
    for i in range(m - 1, -1, -1):
        mx, my = mean2d[i, 0], mean2d[i, 1]
        r = radius[i]
        x0 = max(int(np.ceil(mx - r)), 0)
        x1 = min(int(np.floor(mx + r)), width - 1)
        y0 = max(int(np.ceil(my - r)), 0)
        y1 = min(int(np.floor(my + r)), height - 1)
        ia, ib, ic = cinv[i, 0], cinv[i, 1], cinv[i, 2]
        cr, cg, cb = color[i, 0], color[i, 1], color[i, 2]
        for py in range(y0, y1 + 1):
            dy = py - my
            for px in range(x0, x1 + 1):
                dx = px - mx
                if dx * dx + dy * dy > r * r:
                    continue
                if last_rank[py, px] < i + 1:
                    continue
                q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
                g = np.exp(-0.5 * q)
                a = opacity[i] * g
                clamped = a > ALPHA_MAX
                if clamped:
                    a = ALPHA_MAX
                if a < ALPHA_MIN:
                    continue
                ti = t_after[py, px] / (1.0 - a)
                w = a * ti
                ur = upstream[py, px, 0]
                ug = upstream[py, px, 1]
                ub = upstream[py, px, 2]
                g_color[i, 0] += ur * w
                g_color[i, 1] += ug * w
                g_color[i, 2] += ub * w
                # d(pixel)/d(alpha') = T_i * c - S / (1 - alpha')
                inv1ma = 1.0 / (1.0 - a)
                da = (ur * (ti * cr - s_r[py, px] * inv1ma)
                      + ug * (ti * cg - s_g[py, px] * inv1ma)
                      + ub * (ti * cb - s_b[py, px] * inv1ma))
                if not clamped:
                    g_alpha[i] += da * g
                    dq = da * opacity[i] * g * (-0.5)
                    g_mean[i, 0] += dq * (-(2.0 * ia * dx + 2.0 * ib * dy))
                    g_mean[i, 1] += dq * (-(2.0 * ib * dx + 2.0 * ic * dy))
                    g_cinv[i, 0] += dq * dx * dx
                    g_cinv[i, 1] += dq * 2.0 * dx * dy
                    g_cinv[i, 2] += dq * dy * dy
                t_after[py, px] = ti
                s_r[py, px] = w * cr + s_r[py, px]
                s_g[py, px] = w * cg + s_g[py, px]
                s_b[py, px] = w * cb + s_b[py, px]
    return g_mean, g_cinv, g_alpha, g_color


def render(scene: GaussianScene, camera: Camera, scale: float,
           return_stats: bool = False):
    """Render the scene; returns an (H, W, 3) float image in [0, 1].

    With ``return_stats`` also returns (final transmittance, sum of
    compositing weights) per pixel for conservation checks.
    """
    fx, fy, cx, cy, width, height = camera.scaled(scale)
    proj = project(scene, camera, scale)
    order = _depth_sorted(proj)
    bg = np.clip(scene.background, 0.0, 1.0)
    image, trans, weight_sum, _ = _forward_kernel(
        np.ascontiguousarray(proj.mean2d[order]),
        np.ascontiguousarray(proj.cov2d_inv[order]),
        np.ascontiguousarray(proj.opacity[order]),
        np.ascontiguousarray(proj.color[order]),
        np.ascontiguousarray(proj.radius[order]),
        bg, height, width)
    if return_stats:
        return image, trans, weight_sum
    return image


def render_backward(scene: GaussianScene, camera: Camera, scale: float,
                    upstream: np.ndarray) -> RenderGradients:
    """Gradient of sum(upstream * render(scene, camera, scale)) w.r.t. every
    Gaussian parameter (in the unconstrained parameterization)."""
    fx, fy, cx, cy, width, height = camera.scaled(scale)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (height, width, 3):
        raise UsageError(f"upstream shape {upstream.shape} does not match render "
                         f"output {(height, width, 3)}")
    grads = RenderGradients.zeros(scene.count)
    proj = project(scene, camera, scale)
    if proj.mean2d.shape[0] == 0:
        return grads
    order = _depth_sorted(proj)
    mean2d = np.ascontiguousarray(proj.mean2d[order])
    cinv = np.ascontiguousarray(proj.cov2d_inv[order])
    opac = np.ascontiguousarray(proj.opacity[order])
    color = np.ascontiguousarray(proj.color[order])
    radius = np.ascontiguousarray(proj.radius[order])
    bg = np.clip(scene.background, 0.0, 1.0)

    _, trans, _, last_rank = _forward_kernel(mean2d, cinv, opac, color, radius,
                                             bg, height, width)
    g_mean, g_cinv, g_alpha, g_color = _backward_kernel(
        mean2d, cinv, opac, color, radius, bg, upstream, trans, last_rank)

    # Undo the depth sort: screen-space grads in projection (culled) order.
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    g_mean = g_mean[inv]
    g_cinv = g_cinv[inv]
    g_alpha = g_alpha[inv]
    g_color = g_color[inv]

    src = proj.source_index
    sub = scene.positions[src]
    W = camera.rotation_w2c
    pc = sub @ W.T + camera.translation_w2c
    x, y, z = pc.T

    # cinv -> cov2d: d(inv(C)) = -inv(C) dC inv(C).
    ia, ib, ic = proj.cov2d_inv.T
    lam = np.empty((len(src), 2, 2))
    lam[:, 0, 0] = ia
    lam[:, 0, 1] = ib
    lam[:, 1, 0] = ib
    lam[:, 1, 1] = ic
    g_lam = np.empty((len(src), 2, 2))
    g_lam[:, 0, 0] = g_cinv[:, 0]
    g_lam[:, 0, 1] = 0.5 * g_cinv[:, 1]
    g_lam[:, 1, 0] = 0.5 * g_cinv[:, 1]
    g_lam[:, 1, 1] = g_cinv[:, 2]
    g_cov2d = -np.einsum("nij,njk,nkl->nil", lam, g_lam, lam)

    # cov2d -> Sigma (through M3 = J W) and -> camera-space position (through J).
    R = quats_to_rotations(scene.rotations[src])
    dvec = np.exp(2.0 * scene.log_scales[src])
    sigma = np.einsum("nij,nj,nkj->nik", R, dvec, R)
    J = np.zeros((len(src), 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * x / z ** 2
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * y / z ** 2
    M3 = J @ W
    g_sigma = np.einsum("nji,njk,nkl->nil", M3, g_cov2d, M3)

    V = np.einsum("ij,njk,lk->nil", W, sigma, W)  # W Sigma W^T
    g_J = 2.0 * np.einsum("nij,njk,nkl->nil", g_cov2d, J, V)

    g_pc = np.zeros((len(src), 3))
    z2 = z ** 2
    z3 = z ** 3
    g_pc[:, 0] += g_J[:, 0, 2] * (-fx / z2)
    g_pc[:, 1] += g_J[:, 1, 2] * (-fy / z2)
    g_pc[:, 2] += (g_J[:, 0, 0] * (-fx / z2) + g_J[:, 1, 1] * (-fy / z2)
                   + g_J[:, 0, 2] * (2.0 * fx * x / z3)
                   + g_J[:, 1, 2] * (2.0 * fy * y / z3))

    # mean2d -> camera-space position.
    g_pc[:, 0] += g_mean[:, 0] * fx / z
    g_pc[:, 1] += g_mean[:, 1] * fy / z
    g_pc[:, 2] += -g_mean[:, 0] * fx * x / z2 - g_mean[:, 1] * fy * y / z2

    g_position = g_pc @ W

    # Sigma -> log_scale and rotation quaternion.
    rtgr = np.einsum("nji,njk,nkl->nil", R, g_sigma, R)  # R^T g_Sigma R
    g_log_scale = np.einsum("nii->ni", rtgr) * 2.0 * dvec
    g_R = 2.0 * np.einsum("nij,njk,nk->nik", g_sigma, R, dvec)
    g_rotation = _rotation_grad_to_quat(scene.rotations[src], g_R)

    opacity = proj.opacity
    g_logit = g_alpha * opacity * (1.0 - opacity)
    raw = scene.colors[src]
    g_color_raw = g_color * ((raw >= 0.0) & (raw <= 1.0))

    grads.d_position[src] = g_position
    grads.d_log_scale[src] = g_log_scale
    grads.d_rotation[src] = g_rotation
    grads.d_opacity_logit[src] = g_logit
    grads.d_color[src] = g_color_raw
    # Half-viewport units keep the densification threshold resolution-free.
    grads.mean2d_grad_norm[src] = np.hypot(g_mean[:, 0] * (width / 2.0),
                                           g_mean[:, 1] * (height / 2.0))
    grads.visible[src] = True
    return grads


def _rotation_grad_to_quat(quats: np.ndarray, g_R: np.ndarray) -> np.ndarray:
    """Chain dL/dR through R(q_hat) and the q -> q_hat normalization."""
    norms = np.linalg.norm(quats, axis=1)
    qh = quats / norms[:, None]
    w, x, y, z = qh.T
    n = quats.shape[0]
    zero = np.zeros(n)
    dR = np.empty((n, 4, 3, 3))
    dR[:, 0] = 2.0 * np.stack([
        np.stack([zero, -z, y], axis=1),
        np.stack([z, zero, -x], axis=1),
        np.stack([-y, x, zero], axis=1)], axis=1)
    dR[:, 1] = 2.0 * np.stack([
        np.stack([zero, y, z], axis=1),
        np.stack([y, -2 * x, -w], axis=1),
        np.stack([z, w, -2 * x], axis=1)], axis=1)
    dR[:, 2] = 2.0 * np.stack([
        np.stack([-2 * y, x, w], axis=1),
        np.stack([x, zero, z], axis=1),
        np.stack([-w, z, -2 * y], axis=1)], axis=1)
    dR[:, 3] = 2.0 * np.stack([
        np.stack([-2 * z, -w, x], axis=1),
        np.stack([w, -2 * z, y], axis=1),
        np.stack([x, y, zero], axis=1)], axis=1)
    g_qh = np.einsum("nij,nkij->nk", g_R, dR)
    # d q_hat / d q = (I - q_hat q_hat^T) / ||q||
    proj = g_qh - np.sum(g_qh * qh, axis=1, keepdims=True) * qh
    return proj / norms[:, None]
