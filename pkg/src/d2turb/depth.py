"""Depth-to-distance projection and turbulence-strength modulation.

Turbulence accumulates along the optical path, so the degradation a pixel
suffers depends on how far away the imaged surface is. This module turns a
relative depth map into a per-pixel modulation weight:

    depth in [0, 1]  ->  physical distance z  ->  modulation M in [0, 1]

The distance projection places the scene on a configurable slice of the
optical path: ``z = L * ((1 - s) * depth + s)``. The baseline offset ``s``
keeps foreground objects at a realistic standoff (long-range telephoto
scenes never start at the camera aperture). The modulation weight follows
the same 3/5 power law that governs how the Fried parameter grows as the
path shortens, normalized so the most distant allowed surface gets M = 1.

All power-law evaluation is done in float64 regardless of the input dtype;
the irrational exponent makes banding visible when evaluated in float32.
"""

from __future__ import annotations

import logging

import numpy as np

from .config import PathGeometry
from .errors import DomainError, NormalizationError
from .validation import ensure_depth

log = logging.getLogger("d2turb")

# Exponent of the distance power law for the Fried parameter.
FRIED_EXPONENT = 3.0 / 5.0


def project_depth(depth: np.ndarray, geom: PathGeometry) -> np.ndarray:
    """Project a relative depth map onto physical propagation distances.

    Parameters
    ----------
    depth:
        H x W array of relative depth in [0, 1], 1 = farthest.
    geom:
        Path geometry (total length, baseline offset).

    Returns
    -------
    H x W float64 array of distances in meters, each in
    ``[L * s, L]``.
    """
    depth = ensure_depth(depth)
    return geom.path_length * ((1.0 - geom.baseline_offset) * depth + geom.baseline_offset)


def fried_at_distance(z, r0_at_path: float, path_length: float):
    """Fried parameter at distance ``z`` given its value at the full path.

    Under a uniform refractive-index structure constant, a shorter path
    accumulates less wavefront distortion and the Fried parameter grows:

        r0(z) = r0(L) * (L / z) ** (3/5)

    Accepts scalars or arrays in ``z``; strictly decreasing in ``z``.
    """
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0.0):
        raise DomainError("distance z must be positive")
    if np.any(z > path_length):
        raise DomainError("distance z must not exceed the path length")
    if r0_at_path <= 0.0:
        raise DomainError("r0 at the full path must be positive")
    out = r0_at_path * (path_length / z) ** FRIED_EXPONENT
    return float(out) if out.ndim == 0 else out


def modulation_map(distances: np.ndarray, z_max: float) -> np.ndarray:
    """Per-pixel turbulence-strength modulation from physical distances.

    ``M(x) = (z(x) / z_max) ** (3/5)``, i.e. the ratio of turbulence
    strength accumulated up to z(x) versus the strength at the
    normalization distance z_max. Distances beyond z_max are rejected
    because they would produce weights above 1.
    """
    distances = np.asarray(distances, dtype=np.float64)
    if z_max <= 0.0:
        raise DomainError("z_max must be positive")
    if np.any(distances <= 0.0):
        raise DomainError("distances must be positive")
    if np.any(distances > z_max):
        raise NormalizationError(
            f"distance {distances.max():g} exceeds normalization maximum {z_max:g}"
        )
    return (distances / z_max) ** FRIED_EXPONENT


def normalize_depth_image(raw: np.ndarray, bit_depth_max: float | None = None) -> np.ndarray:
    """Normalize an integer depth image to [0, 1], clamping stragglers.

    Depth maps from monocular estimators occasionally carry values outside
    the nominal range after scaling; those are clamped with a warning
    rather than rejected.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if bit_depth_max is not None:
        arr = arr / float(bit_depth_max)
    lo, hi = arr.min(), arr.max()
    if lo < 0.0 or hi > 1.0:
        log.warning(
            "depth values outside [0, 1] (min %g, max %g); clamping", lo, hi
        )
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def resolve_z_max(geom: PathGeometry, distances: np.ndarray | None = None) -> float:
    """Normalization distance per the configured policy.

    The default pins z_max to the full path length so a far-plane pixel
    always gets M = 1. The per-image policy instead uses the scene's own
    maximum distance, stretching every image to the full modulation range.
    """
    if geom.z_max_policy == "per-image":
        if distances is None:
            raise DomainError("per-image z_max policy requires a distance map")
        return float(np.max(distances))
    if geom.z_max is not None:
        return float(geom.z_max)
    return float(geom.path_length)
