"""Input validation helpers shared across the engine.

All public operations funnel their array arguments through these checks so
that malformed data is rejected with a named error before any computation
runs. Checks never copy unless a dtype conversion is required.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError, ShapeError


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed; return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise InvalidInputError("an explicit seed or numpy Generator is required")
    return np.random.default_rng(int(rng))


def ensure_image(arr, name: str = "image") -> np.ndarray:
    """Validate an H x W x 3 image with finite values in [0, 1]."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")
    return arr


def ensure_depth(arr, image_shape=None, name: str = "depth") -> np.ndarray:
    """Validate an H x W relative depth map with values in [0, 1]."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must have shape (H, W), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")
    if image_shape is not None and arr.shape != tuple(image_shape[:2]):
        raise ShapeError(
            f"{name} shape {arr.shape} does not match image shape {tuple(image_shape[:2])}"
        )
    return arr


def ensure_field(arr, name: str = "field") -> np.ndarray:
    """Validate an H x W x 2 displacement field with finite entries."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ShapeError(f"{name} must have shape (H, W, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def ensure_modulation(arr, field_shape=None, name: str = "modulation") -> np.ndarray:
    """Validate an H x W modulation map with values in [0, 1]."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must have shape (H, W), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidInputError(f"{name} values must lie in [0, 1]")
    if field_shape is not None and arr.shape != tuple(field_shape[:2]):
        raise ShapeError(
            f"{name} shape {arr.shape} does not match target shape {tuple(field_shape[:2])}"
        )
    return arr
