"""Upscaler model registry.

A model is ``fn(image_bgr: np.ndarray, factor: int) -> np.ndarray`` taking
and returning uint8/uint16 BGR arrays. Only the dependency-free ``bicubic``
model ships here; neural upscalers (SwinIR and friends) can be registered
under their own ids by code that has the weights available.
"""

from __future__ import annotations

import cv2
import numpy as np


class ModelError(RuntimeError):
    """The requested model cannot be loaded or run."""


def bicubic(image: np.ndarray, factor: int) -> np.ndarray:
    h, w = image.shape[:2]
    return cv2.resize(image, (w * factor, h * factor),
                      interpolation=cv2.INTER_CUBIC)


MODELS = {"bicubic": bicubic}


def get_model(model_id: str):
    try:
        return MODELS[model_id]
    except KeyError:
        raise ModelError(
            f"unknown model id {model_id!r}; available: {sorted(MODELS)}"
        ) from None
