"""Image-space operators shared by the training objective and the metrics.

Resampling uses the Catmull-Rom cubic (a = -0.5) with the align-centers
convention x_src = (x_dst + 0.5) * factor - 0.5 and clamp-to-edge borders.
Both directions are realized as explicit per-axis weight matrices, so the
operators are exactly linear and their adjoints are plain transposes. On
downsampling the kernel support is stretched by the factor (anti-aliasing),
matching how LR datasets are conventionally produced; weights are
renormalized to sum to 1 after border clamping.

SSIM is the standard 11x11 Gaussian-window (sigma 1.5) formulation with
K1=0.01, K2=0.03 and dynamic range 1, computed per channel on a full-size
map (clamp-to-edge window stats) and averaged. Its gradient is analytic,
propagated through the same window matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np

from .errors import DataError, UsageError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PSNR_SENTINEL = 99.99


@dataclass(frozen=True)
class ResampleSpec:
    """Downsampling operator configuration (the LR-formation operator)."""

    factor: int
    antialias: bool = True

    def __post_init__(self):
        if self.factor < 1:
            raise UsageError("resample factor must be >= 1")


def _cubic(t: np.ndarray) -> np.ndarray:
    """Catmull-Rom kernel (Keys cubic with a = -0.5)."""
    t = np.abs(t)
    out = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    out[near] = (1.5 * t[near] - 2.5) * t[near] ** 2 + 1.0
    out[far] = -0.5 * (((t[far] - 5.0) * t[far] + 8.0) * t[far] - 4.0)
    return out


@lru_cache(maxsize=64)
def _resample_matrix(n_in: int, n_out: int, step: float, support_scale: float):
    """(n_out, n_in) weight matrix: rows sum to 1 within 1e-12."""
    mat = np.zeros((n_out, n_in))
    half = 2.0 * support_scale
    for i in range(n_out):
        center = (i + 0.5) * step - 0.5
        j0 = int(np.ceil(center - half))
        j1 = int(np.floor(center + half))
        taps = np.arange(j0, j1 + 1)
        w = _cubic((taps - center) / support_scale)
        w /= w.sum()
        np.add.at(mat[i], np.clip(taps, 0, n_in - 1), w)
    return mat


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise UsageError(f"expected (H, W, 3) image, got shape {img.shape}")
    return img


def downsample(image: np.ndarray, spec: ResampleSpec) -> np.ndarray:
    """Anti-aliased bicubic downsampling by an integer factor."""
    image = _check_image(image)
    h, w = image.shape[:2]
    ho, wo = int(round(h / spec.factor)), int(round(w / spec.factor))
    support = float(spec.factor) if (spec.antialias and spec.factor > 1) else 1.0
    ay = _resample_matrix(h, ho, float(spec.factor), support)
    ax = _resample_matrix(w, wo, float(spec.factor), support)
    return np.einsum("ij,jkc,lk->ilc", ay, image, ax, optimize=True)


def downsample_adjoint(grad_out: np.ndarray, spec: ResampleSpec,
                       in_shape) -> np.ndarray:
    """Exact adjoint (transpose) of :func:`downsample`."""
    grad_out = _check_image(grad_out)
    h, w = in_shape[:2]
    ho, wo = grad_out.shape[:2]
    support = float(spec.factor) if (spec.antialias and spec.factor > 1) else 1.0
    ay = _resample_matrix(h, ho, float(spec.factor), support)
    ax = _resample_matrix(w, wo, float(spec.factor), support)
    return np.einsum("ji,jkc,kl->ilc", ay, grad_out, ax, optimize=True)


def upsample_bicubic(image: np.ndarray, factor: int) -> np.ndarray:
    """Non-antialiased bicubic interpolation by an integer factor."""
    if factor < 1:
        raise UsageError("upsample factor must be >= 1")
    image = _check_image(image)
    h, w = image.shape[:2]
    ay = _resample_matrix(h, h * factor, 1.0 / factor, 1.0)
    ax = _resample_matrix(w, w * factor, 1.0 / factor, 1.0)
    return np.einsum("ij,jkc,lk->ilc", ay, image, ax, optimize=True)


def _check_pair(a, b):
    a = _check_image(a)
    b = _check_image(b)
    if a.shape != b.shape:
        raise UsageError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def l1(a: np.ndarray, b: np.ndarray, grad: bool = False):
    """Mean absolute difference; optional gradient w.r.t. ``a``."""
    a, b = _check_pair(a, b)
    diff = a - b
    val = float(np.mean(np.abs(diff)))
    if not grad:
        return val
    return val, np.sign(diff) / diff.size


def l2(a: np.ndarray, b: np.ndarray, grad: bool = False):
    """Mean squared difference; optional gradient w.r.t. ``a``."""
    a, b = _check_pair(a, b)
    diff = a - b
    val = float(np.mean(diff ** 2))
    if not grad:
        return val
    return val, 2.0 * diff / diff.size


@lru_cache(maxsize=32)
def _window_matrix(n: int):
    """(n, n) separable Gaussian-window operator with clamp-to-edge taps."""
    half = SSIM_WINDOW // 2
    offsets = np.arange(-half, half + 1)
    g = np.exp(-0.5 * (offsets / SSIM_SIGMA) ** 2)
    g /= g.sum()
    mat = np.zeros((n, n))
    for i in range(n):
        np.add.at(mat[i], np.clip(i + offsets, 0, n - 1), g)
    return mat


def _windowed(img2d: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    return gy @ img2d @ gx.T


def _windowed_adjoint(img2d: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    return gy.T @ img2d @ gx


def ssim(a: np.ndarray, b: np.ndarray, grad: bool = False):
    """Mean SSIM over channels; optional analytic gradient w.r.t. ``a``."""
    a, b = _check_pair(a, b)
    h, w = a.shape[:2]
    if min(h, w) < SSIM_WINDOW:
        raise UsageError(f"image {h}x{w} smaller than the {SSIM_WINDOW}px SSIM window")
    gy = _window_matrix(h)
    gx = _window_matrix(w)
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    total = 0.0
    g_total = np.zeros_like(a) if grad else None
    npx = h * w * 3
    for ch in range(3):
        x = a[:, :, ch]
        y = b[:, :, ch]
        mu_x = _windowed(x, gy, gx)
        mu_y = _windowed(y, gy, gx)
        xx = _windowed(x * x, gy, gx)
        xy = _windowed(x * y, gy, gx)
        yy = _windowed(y * y, gy, gx)
        var_x = xx - mu_x ** 2
        var_y = yy - mu_y ** 2
        cov = xy - mu_x * mu_y
        A = 2.0 * mu_x * mu_y + c1
        B = 2.0 * cov + c2
        C = mu_x ** 2 + mu_y ** 2 + c1
        D = var_x + var_y + c2
        smap = (A * B) / (C * D)
        total += float(np.sum(smap))
        if grad:
            # Independent window statistics: u1 = mu_x, u2 = W(x^2), u3 = W(xy);
            # var_x = u2 - u1^2, cov = u3 - u1 mu_y.
            q = C * D
            dP_du1 = 2.0 * mu_y * B - 2.0 * mu_y * A
            dP_du3 = 2.0 * A
            dQ_du1 = 2.0 * mu_x * D - 2.0 * mu_x * C
            dQ_du2 = C
            common = 1.0 / (q * q * npx)
            g1 = (dP_du1 * q - A * B * dQ_du1) * common
            g2 = (-A * B * dQ_du2) * common
            g3 = (dP_du3 * q) * common
            g_total[:, :, ch] = (_windowed_adjoint(g1, gy, gx)
                                 + _windowed_adjoint(g2, gy, gx) * 2.0 * x
                                 + _windowed_adjoint(g3, gy, gx) * y)
    val = total / npx
    if not grad:
        return val
    return val, g_total


def dssim(a: np.ndarray, b: np.ndarray, grad: bool = False):
    """Structural dissimilarity (1 - SSIM) / 2, in [0, 1]."""
    if not grad:
        return (1.0 - ssim(a, b)) / 2.0
    s, g = ssim(a, b, grad=True)
    return (1.0 - s) / 2.0, -0.5 * g


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB with peak 1.0; exact match reports the 99.99 sentinel."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return float(-10.0 * np.log10(mse))


def total_variation(a: np.ndarray, grad: bool = False):
    """Anisotropic total variation (mean of |dx| + |dy|), with gradient."""
    a = _check_image(a)
    dx = a[:, 1:, :] - a[:, :-1, :]
    dy = a[1:, :, :] - a[:-1, :, :]
    denom = a.size
    val = float((np.abs(dx).sum() + np.abs(dy).sum()) / denom)
    if not grad:
        return val
    g = np.zeros_like(a)
    sx = np.sign(dx) / denom
    sy = np.sign(dy) / denom
    g[:, 1:, :] += sx
    g[:, :-1, :] -= sx
    g[1:, :, :] += sy
    g[:-1, :, :] -= sy
    return val, g


def write_png(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Write an RGB float image in [0, 1]; rounding is half-to-even."""
    image = _check_image(image)
    if bit_depth == 8:
        peak, dtype = 255, np.uint8
    elif bit_depth == 16:
        peak, dtype = 65535, np.uint16
    else:
        raise UsageError("bit_depth must be 8 or 16")
    q = np.clip(np.round(image * peak), 0, peak).astype(dtype)
    if not cv2.imwrite(str(path), cv2.cvtColor(q, cv2.COLOR_RGB2BGR)):
        raise DataError(f"failed to write {path}")


def read_png(path) -> np.ndarray:
    """Read an 8- or 16-bit PNG into an RGB float image in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DataError(f"cannot read image {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    peak = 65535.0 if raw.dtype == np.uint16 else 255.0
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float64) / peak
