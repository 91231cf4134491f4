"""Pseudo-HR target providers.

Three interchangeable sources of per-view HR supervision targets:

- ``bicubic``: upsample the LR observation (no external information);
- ``oracle``: the stored ground-truth HR view, for controlled experiments
  that isolate the training objective from 2D SR model quality;
- ``file``: externally generated pseudo-HR images read from disk using the
  naming convention ``<dir>/<view_id:05d>_x<factor>.png``.

Targets are cached on first access and never change during training.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError, UsageError
from .image_ops import read_png, upsample_bicubic

PRIOR_KINDS = ("bicubic", "oracle", "file")


class PriorProvider:
    def __init__(self, kind: str, factor: int, source=None):
        """``source`` is a view_id -> HR image mapping for ``oracle`` and a
        directory path for ``file``; unused for ``bicubic``."""
        if kind not in PRIOR_KINDS:
            raise UsageError(f"unknown prior kind {kind!r}, expected one of {PRIOR_KINDS}")
        if factor < 1:
            raise UsageError("prior factor must be >= 1")
        self.kind = kind
        self.factor = factor
        self.source = source
        self._cache = {}
        if kind == "oracle" and source is None:
            raise UsageError("oracle prior needs a ground-truth HR view mapping")
        if kind == "file":
            if source is None:
                raise UsageError("file prior needs a directory path")
            self.source = Path(source)

    def file_path(self, view_id: int) -> Path:
        return Path(self.source) / f"{view_id:05d}_x{self.factor}.png"

    def generate(self, view_id: int, lr_image: np.ndarray) -> np.ndarray:
        """Pseudo-HR target for one view; deterministic and cached."""
        if view_id in self._cache:
            return self._cache[view_id]
        lr_image = np.asarray(lr_image, dtype=np.float64)
        expected = (lr_image.shape[0] * self.factor, lr_image.shape[1] * self.factor, 3)
        if self.kind == "bicubic":
            out = upsample_bicubic(lr_image, self.factor)
        elif self.kind == "oracle":
            if view_id not in self.source:
                raise DataError(f"oracle prior has no HR image for view {view_id}")
            out = np.asarray(self.source[view_id], dtype=np.float64)
        else:
            path = self.file_path(view_id)
            if not path.exists():
                raise DataError(f"file prior: missing {path} for view {view_id}")
            out = read_png(path)
        if out.shape != expected:
            raise DataError(
                f"prior for view {view_id} has shape {out.shape}, expected {expected} "
                f"(LR {lr_image.shape[:2]} x factor {self.factor})")
        self._cache[view_id] = out
        return out


def generate_prior(provider: PriorProvider, view_id: int,
                   lr_image: np.ndarray) -> np.ndarray:
    return provider.generate(view_id, lr_image)
