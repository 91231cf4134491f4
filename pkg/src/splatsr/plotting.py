"""Minimal line plotting into an RGB image buffer (no plotting dependency).

Good enough for sweep outputs: axes, grid ticks, a polyline with markers,
and a tiny 3x5 digit font for tick labels.
"""

from __future__ import annotations

import numpy as np

# 3x5 bitmap glyphs for tick labels.
_GLYPHS = {
    "0": ["111", "101", "101", "101", "111"],
    "1": ["010", "110", "010", "010", "111"],
    "2": ["111", "001", "111", "100", "111"],
    "3": ["111", "001", "111", "001", "111"],
    "4": ["101", "101", "111", "001", "001"],
    "5": ["111", "100", "111", "001", "111"],
    "6": ["111", "100", "111", "101", "111"],
    "7": ["111", "001", "010", "010", "010"],
    "8": ["111", "101", "111", "101", "111"],
    "9": ["111", "101", "111", "001", "111"],
    ".": ["000", "000", "000", "000", "010"],
    "-": ["000", "000", "111", "000", "000"],
}


def _draw_text(img, text, y, x, color):
    h, w = img.shape[:2]
    for ch in text:
        glyph = _GLYPHS.get(ch)
        if glyph is None:
            x += 4
            continue
        for r, row in enumerate(glyph):
            for c, bit in enumerate(row):
                if bit == "1" and 0 <= y + r < h and 0 <= x + c < w:
                    img[y + r, x + c] = color
        x += 4


def _draw_line(img, y0, x0, y1, x1, color):
    """Bresenham polyline segment."""
    h, w = img.shape[:2]
    dy = abs(y1 - y0)
    dx = abs(x1 - x0)
    sy = 1 if y0 < y1 else -1
    sx = 1 if x0 < x1 else -1
    err = dx - dy
    y, x = y0, x0
    while True:
        if 0 <= y < h and 0 <= x < w:
            img[y, x] = color
        if y == y1 and x == x1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy


def line_plot(xs, ys, width: int = 480, height: int = 320) -> np.ndarray:
    """Render (xs, ys) as a line plot; returns an (H, W, 3) image in [0, 1]."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    img = np.ones((height, width, 3))
    axis = np.zeros(3)
    line = np.array([0.85, 0.25, 0.1])
    ml, mr, mt, mb = 44, 12, 12, 24  # margins
    x0a, x1a = ml, width - mr - 1
    y0a, y1a = height - mb - 1, mt
    _draw_line(img, y0a, x0a, y0a, x1a, axis)
    _draw_line(img, y0a, x0a, y1a, x0a, axis)

    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad

    def px(x):
        return int(round(x0a + (x - xmin) / (xmax - xmin) * (x1a - x0a)))

    def py(y):
        return int(round(y0a - (y - ymin) / (ymax - ymin) * (y0a - y1a)))

    for frac in (0.0, 0.5, 1.0):
        xv = xmin + frac * (xmax - xmin)
        yv = ymin + frac * (ymax - ymin)
        _draw_line(img, y0a, px(xv), y0a + 3, px(xv), axis)
        _draw_line(img, py(yv), x0a - 3, py(yv), x0a, axis)
        _draw_text(img, f"{xv:.2f}", y0a + 6, px(xv) - 8, axis)
        _draw_text(img, f"{yv:.2f}", py(yv) - 2, 4, axis)

    pts = [(py(float(y)), px(float(x))) for x, y in zip(xs, ys)]
    for (ya, xa), (yb, xb) in zip(pts[:-1], pts[1:]):
        _draw_line(img, ya, xa, yb, xb, line)
    for y, x in pts:
        img[max(y - 1, 0):y + 2, max(x - 1, 0):x + 2] = line
    return img
