"""Depth-aware blur, geometric warping, and the full scene degradation.

The degradation applies two coupled effects, both scaled by the same
modulation map M:

* blur: ``I_blur = M * (K x I) + (1 - M) * I`` where ``K x I`` is the
  spatially varying convolution realized by the PSF anchor grid;
* warp: the blurred image is resampled through the dense displacement
  field, and a second warp of the *unblurred* image produces the tilt-only
  intermediate used as supervision for decoupled restoration.

Both warps in one sample use the identical displacement field.

Boundary policy: reflect padding for convolution, border clamping for
sampling. Outputs therefore stay inside the input value range and carry no
dark vignette.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .config import OpticalConfig
from .depth import modulation_map, project_depth, resolve_z_max
from .errors import DomainError, EngineError, InvalidInputError, ShapeError
from .fields import TiltSpectrumParams, modulate_displacement, synthesize_raw_field, tilt_rms_for_strength
from .flowinv import BackwardFlow, forward_splat_invert
from .validation import as_generator, ensure_depth, ensure_field, ensure_image, ensure_modulation
from .zernike import PsfGrid, build_psf_grid


@dataclass
class CleanScene:
    """A clean image paired with its relative depth map."""

    image: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W) in [0, 1], 1 = farthest
    identifier: str = "scene"

    def validated(self) -> "CleanScene":
        image = ensure_image(self.image)
        depth = ensure_depth(self.depth, image.shape)
        return CleanScene(image, depth, self.identifier)


@dataclass
class DegradedSample:
    """The full training tuple emitted for one scene draw."""

    turb: np.ndarray  # degraded image (blur + warp)
    tilt: np.ndarray  # warp-only intermediate
    clean: np.ndarray  # the source image
    backward_flow: BackwardFlow  # supervision flow undoing the warp
    metadata: dict
    forward_displacement: np.ndarray  # the field both warps used
    modulation: np.ndarray
    blur: np.ndarray | None = None  # persisted only on request


def varying_convolve(image: np.ndarray, psfs: PsfGrid) -> np.ndarray:
    """Spatially varying convolution via the PSF anchor grid.

    Each pixel's result is the bilinear blend of the four convolutions
    with its enclosing anchor kernels. Blending convolution outputs equals
    blending the kernels themselves (linearity), but lets the work proceed
    in per-cell tiles. Uses reflect padding at the image boundary.
    """
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    height, width = image.shape[:2]
    kernels = psfs.kernels
    ksize = psfs.kernel_size
    if ksize > height or ksize > width:
        raise DomainError(
            f"kernel size {ksize} exceeds image size {height} x {width}"
        )
    margin = ksize // 2
    padded = np.pad(image, ((margin, margin), (margin, margin), (0, 0)), mode="reflect")

    ay, ax = psfs.anchors_y, psfs.anchors_x
    rows_idx = np.arange(height)
    cols_idx = np.arange(width)
    cell_y = np.clip(np.searchsorted(ay, rows_idx, side="right") - 1, 0, len(ay) - 2)
    cell_x = np.clip(np.searchsorted(ax, cols_idx, side="right") - 1, 0, len(ax) - 2)

    out = np.empty_like(image)
    for gy in range(len(ay) - 1):
        rows = rows_idx[cell_y == gy]
        if rows.size == 0:
            continue
        y0, y1 = int(rows[0]), int(rows[-1])
        wy = ((rows - ay[gy]) / (ay[gy + 1] - ay[gy]))[:, None, None]
        for gx in range(len(ax) - 1):
            cols = cols_idx[cell_x == gx]
            if cols.size == 0:
                continue
            x0, x1 = int(cols[0]), int(cols[-1])
            wx = ((cols - ax[gx]) / (ax[gx + 1] - ax[gx]))[None, :, None]
            tile = padded[y0 : y1 + 1 + 2 * margin, x0 : x1 + 1 + 2 * margin, :]
            c00 = fftconvolve(tile, kernels[gy, gx][:, :, None], mode="valid")
            c01 = fftconvolve(tile, kernels[gy, gx + 1][:, :, None], mode="valid")
            c10 = fftconvolve(tile, kernels[gy + 1, gx][:, :, None], mode="valid")
            c11 = fftconvolve(tile, kernels[gy + 1, gx + 1][:, :, None], mode="valid")
            out[y0 : y1 + 1, x0 : x1 + 1, :] = (
                c00 * (1 - wy) * (1 - wx)
                + c01 * (1 - wy) * wx
                + c10 * wy * (1 - wx)
                + c11 * wy * wx
            )
    # Convolution of values in [0, 1] with a unit-sum non-negative kernel
    # stays in range up to roundoff; clip the roundoff.
    np.clip(out, 0.0, 1.0, out=out)
    return out[..., 0] if squeeze else out


def spatially_varying_blur(
    image: np.ndarray, psfs: PsfGrid, modulation: np.ndarray
) -> np.ndarray:
    """Depth-aware blur: blend the convolved image toward the original.

    ``out = M * (K x I) + (1 - M) * I`` pixelwise; a convex combination,
    so the result is bounded by the two images it blends.
    """
    image = ensure_image(image)
    modulation = ensure_modulation(modulation, image.shape)
    convolved = varying_convolve(image, psfs)
    m = modulation[..., None]
    return m * convolved + (1.0 - m) * image


def backward_warp(image: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Resample ``image`` at ``x + delta(x)`` with bilinear interpolation.

    Sample coordinates outside the image are clamped to the border. This
    single operation realizes both degradation warps and the generic grid
    sampler used to undo them.
    """
    image = np.asarray(image, dtype=np.float64)
    delta = ensure_field(delta, "displacement")
    squeeze = image.ndim == 2
    if squeeze:
        image = image[..., None]
    if image.shape[:2] != delta.shape[:2]:
        raise ShapeError(
            f"image shape {image.shape[:2]} does not match field shape {delta.shape[:2]}"
        )
    height, width = image.shape[:2]
    yy, xx = np.mgrid[0:height, 0:width]
    sx = np.clip(xx + delta[..., 0], 0.0, width - 1.0)
    sy = np.clip(yy + delta[..., 1], 0.0, height - 1.0)
    x0 = np.clip(np.floor(sx).astype(np.intp), 0, width - 2) if width > 1 else np.zeros_like(xx)
    y0 = np.clip(np.floor(sy).astype(np.intp), 0, height - 2) if height > 1 else np.zeros_like(yy)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    v00 = image[y0, x0]
    v01 = image[y0, x0 + 1] if width > 1 else v00
    v10 = image[y0 + 1, x0] if height > 1 else v00
    v11 = image[y0 + 1, x0 + 1] if width > 1 and height > 1 else v00
    out = (
        v00 * (1.0 - fx) * (1.0 - fy)
        + v01 * fx * (1.0 - fy)
        + v10 * (1.0 - fx) * fy
        + v11 * fx * fy
    )
    return out[..., 0] if squeeze else out


@contextmanager
def _stage(name: str):
    """Prefix engine errors with the pipeline stage that raised them."""
    try:
        yield
    except EngineError as exc:
        exc.args = (f"{name}: {exc.args[0]}" if exc.args else name,) + exc.args[1:]
        raise


def compute_modulation(scene: CleanScene, config: OpticalConfig) -> np.ndarray:
    """Modulation map for a scene, honoring flat-field mode."""
    if config.flat_field_mode:
        return np.ones(scene.depth.shape)
    distances = project_depth(scene.depth, config.geometry)
    z_max = resolve_z_max(config.geometry, distances)
    return modulation_map(distances, z_max)


def degrade_scene(
    scene: CleanScene,
    config: OpticalConfig,
    rng,
    *,
    d_over_r0: float | None = None,
    seed: int = 0,
    sample_id: str | None = None,
) -> DegradedSample:
    """Run the full degradation protocol on one scene.

    Order of randomness is fixed: the PSF grid consumes the stream first,
    then the displacement field, so a given (seed, config) pair always
    produces the same sample. ``d_over_r0`` may be pinned by the caller
    (the dataset pipeline draws it per sample); otherwise it is drawn
    uniformly from the configured range.
    """
    scene = scene.validated()
    rng = as_generator(rng)
    if d_over_r0 is None:
        lo, hi = config.d_over_r0_range
        d_over_r0 = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    if d_over_r0 < 0.0:
        raise InvalidInputError("d_over_r0 must be >= 0")

    height, width = scene.depth.shape
    with _stage("depth-modulation"):
        modulation = compute_modulation(scene, config)

    with _stage("psf-grid"):
        psfs = build_psf_grid((height, width), config.zernike, d_over_r0, rng)

    tilt_rms = (
        config.tilt.rms_px
        if config.tilt.rms_px is not None
        else tilt_rms_for_strength(d_over_r0, config.tilt.pixels_per_tilt)
    )
    with _stage("displacement-field"):
        params = TiltSpectrumParams(
            config.tilt.correlation_px,
            tilt_rms,
            config.tilt.spectral_exponent,
            config.tilt.inner_scale_px,
        )
        raw = synthesize_raw_field(height, width, params, rng, mode=config.tilt.field_mode)
        delta = modulate_displacement(raw, modulation)

    with _stage("spatially-varying-blur"):
        blur = spatially_varying_blur(scene.image, psfs, modulation)
    with _stage("warp"):
        turb = backward_warp(blur, delta)
        tilt = backward_warp(scene.image, delta)
    with _stage("flow-inversion"):
        flow_bwd = forward_splat_invert(delta)

    from .pipeline import categorize_strength  # cycle-free late import

    geom = config.geometry
    metadata = {
        "sample_id": sample_id if sample_id is not None else scene.identifier,
        "source_id": scene.identifier,
        "seed": int(seed),
        "d_over_r0": float(d_over_r0),
        "category": categorize_strength(d_over_r0),
        "path_length_m": geom.path_length,
        "baseline_offset": geom.baseline_offset,
        "z_max_m": resolve_z_max(geom, project_depth(scene.depth, geom)),
        "tilt_rms_px": float(tilt_rms),
        "kernel_size": config.zernike.kernel_size,
        "psf_grid": list(config.zernike.grid_shape),
        "psf_crop_warnings": psfs.crop_warnings,
        "flat_field_mode": config.flat_field_mode,
        "height": height,
        "width": width,
    }
    return DegradedSample(
        turb=turb,
        tilt=tilt,
        clean=scene.image,
        backward_flow=flow_bwd,
        metadata=metadata,
        forward_displacement=delta,
        modulation=modulation,
        blur=blur if config.persist_blur or config.debug_outputs else None,
    )
