"""Dense displacement-field synthesis from Kolmogorov phase statistics.

The geometric half of the degradation is a pixel-unit displacement field
with turbulence-like spatial statistics. It is synthesized spectrally:
white Gaussian noise is shaped in the frequency domain by the Kolmogorov
power law and mapped back to the spatial domain by an inverse FFT. A von
Karman style roll-off caps power below ``1 / correlation_px`` — the pure
power law diverges at DC, and the roll-off acts as a controllable outer
scale. The DC bin is forced to zero so fields are exactly zero-mean, and
each axis is rescaled post hoc so its empirical RMS equals the requested
value exactly.

Axis convention everywhere: channel 0 is horizontal displacement
(+x right), channel 1 is vertical (+y down), both in pixels.

The default construction draws two independent scalar fields, one per
axis. A scalar phase screen does not define a 2-vector by itself; the
alternative reading — displacement as the gradient of a single screen —
is available via ``field_mode = "phase-gradient"``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .validation import as_generator, ensure_field, ensure_modulation
from .zernike import tilt_variance


@dataclass
class TiltSpectrumParams:
    """Spectrum of the raw (unmodulated) displacement field.

    ``inner_scale_px`` is the aperture-smoothing scale: phase structure
    smaller than the projected aperture blurs the image instead of
    displacing it, so displacement power above that frequency is
    attenuated by a Gaussian factor. Without it the pure power law keeps
    curvature up to the Nyquist frequency and the field cannot be
    inverted to sub-pixel accuracy.
    """

    corr_length_px: float  # outer scale of the roll-off, pixels
    tilt_rms_px: float  # per-axis RMS displacement at full modulation
    spectral_exponent: float = -11.0 / 3.0
    inner_scale_px: float = 1.5

    def __post_init__(self):
        if not self.corr_length_px > 0.0:
            raise DomainError("corr_length_px must be > 0")
        if self.tilt_rms_px < 0.0:
            raise DomainError("tilt_rms_px must be >= 0")
        if self.inner_scale_px < 0.0:
            raise DomainError("inner_scale_px must be >= 0")


def tilt_rms_for_strength(d_over_r0: float, pixels_per_tilt: float) -> float:
    """Derive per-axis displacement RMS from turbulence strength.

    The per-axis tilt coefficient has variance ~0.449 * (D/r0)^(5/3)
    rad^2; ``pixels_per_tilt`` is the plate-scale constant converting one
    radian-unit of wavefront tilt into pixels of image motion.
    """
    return float(np.sqrt(tilt_variance(d_over_r0)) * pixels_per_tilt)


def _spectral_amplitude(height: int, width: int, params: TiltSpectrumParams) -> np.ndarray:
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    k2 = fy * fy + fx * fx
    k0 = 1.0 / params.corr_length_px
    amp = (k2 + k0 * k0) ** (params.spectral_exponent / 4.0)
    if params.inner_scale_px > 0.0:
        amp *= np.exp(-2.0 * np.pi**2 * params.inner_scale_px**2 * k2)
    amp[0, 0] = 0.0  # zero-mean field
    return amp


def _shaped_field(amp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noise = rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)
    return np.fft.ifft2(noise * amp).real


def _rescale_rms(field: np.ndarray, target_rms: float) -> np.ndarray:
    if target_rms == 0.0:
        return np.zeros_like(field)
    rms = np.sqrt(np.mean(field * field))
    if rms == 0.0:
        raise DomainError("degenerate spectral field; cannot rescale to target RMS")
    return field * (target_rms / rms)


def synthesize_raw_field(
    height: int,
    width: int,
    params: TiltSpectrumParams,
    rng,
    mode: str = "independent",
) -> np.ndarray:
    """Synthesize the raw displacement field, shape (H, W, 2).

    Deterministic given the generator state; the x channel always consumes
    the stream before the y channel.
    """
    if height < 8 or width < 8:
        raise DomainError(f"field size must be at least 8 x 8, got {height} x {width}")
    rng = as_generator(rng)
    amp = _spectral_amplitude(height, width, params)
    out = np.empty((height, width, 2))
    if mode == "independent":
        for channel in range(2):
            out[..., channel] = _rescale_rms(_shaped_field(amp, rng), params.tilt_rms_px)
    elif mode == "phase-gradient":
        # One screen, displacement = its gradient. Differentiation tilts
        # the spectrum by k^2 in power, so the screen is synthesized two
        # powers steeper to land the displacement on the requested slope.
        screen_params = TiltSpectrumParams(
            params.corr_length_px, 1.0, params.spectral_exponent - 2.0, params.inner_scale_px
        )
        screen = _shaped_field(_spectral_amplitude(height, width, screen_params), rng)
        gy, gx = np.gradient(screen)
        out[..., 0] = _rescale_rms(gx - gx.mean(), params.tilt_rms_px)
        out[..., 1] = _rescale_rms(gy - gy.mean(), params.tilt_rms_px)
    else:
        raise DomainError(f"unknown field mode {mode!r}")
    return out


def modulate_displacement(raw: np.ndarray, modulation: np.ndarray) -> np.ndarray:
    """Scale the displacement field by the per-pixel modulation weight."""
    raw = ensure_field(raw, "raw displacement")
    modulation = ensure_modulation(modulation, raw.shape)
    return raw * modulation[..., None]
