"""Built-in statistical self-checks, exposed through the CLI.

These are the slow, distribution-level checks that unit tests cannot
afford to run on every change: coefficient variance scaling, the spectral
slope of raw displacement fields, and the flow-inversion round trip. Each
check returns its measured numbers so failures are diagnosable from the
command line output alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .degrade import backward_warp
from .fields import TiltSpectrumParams, synthesize_raw_field
from .flowinv import composition_residual, forward_splat_invert
from .pipeline import psnr
from .zernike import noll_covariance, sample_coefficient_batch, tilt_variance


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def smooth_test_image(height: int, width: int, seed: int, blur_sigma: float = 6.0) -> np.ndarray:
    """A smooth synthetic RGB image with full [0.05, 0.95] contrast."""
    rng = np.random.default_rng(seed)
    img = gaussian_filter(rng.random((height, width, 3)), (blur_sigma, blur_sigma, 0))
    lo, hi = img.min(), img.max()
    return 0.05 + 0.9 * (img - lo) / (hi - lo)


def variance_scaling_check(
    strengths=(1.0, 2.0, 4.0, 8.0),
    draws: int = 10_000,
    modes: int = 36,
    seed: int = 2024,
    slope_tolerance: float = 0.05,
    variance_tolerance: float = 0.05,
) -> CheckResult:
    """Sampled coefficient variance must scale as (D/r0)^(5/3)."""
    rng = np.random.default_rng(seed)
    tilt_vars = []
    total_vars = []
    for strength in strengths:
        cov = noll_covariance(modes, strength)
        batch = sample_coefficient_batch(cov, rng, draws)
        tilt_vars.append(batch[:, 1].var())
        total_vars.append(batch[:, 1:].var(axis=0).sum())
    slope = np.polyfit(np.log(strengths), np.log(total_vars), 1)[0]
    rel_err = max(
        abs(v / tilt_variance(s) - 1.0) for v, s in zip(tilt_vars, strengths)
    )
    passed = abs(slope - 5.0 / 3.0) <= slope_tolerance and rel_err <= variance_tolerance
    return CheckResult(
        "variance-scaling",
        passed,
        f"slope {slope:.4f} (target 5/3 +/- {slope_tolerance}), "
        f"tilt variance max rel err {rel_err:.3%} (limit {variance_tolerance:.0%})",
    )


def radial_psd_slope(
    field: np.ndarray, band: tuple[float, float] = (2.0 / 256.0, 20.0 / 256.0), bins: int = 24
) -> float:
    """Log-log slope of the radially averaged power spectrum over a band."""
    power = np.abs(np.fft.fft2(field)) ** 2
    fy = np.fft.fftfreq(field.shape[0])[:, None]
    fx = np.fft.fftfreq(field.shape[1])[None, :]
    radius = np.hypot(fy, fx).ravel()
    flat = power.ravel()
    edges = np.logspace(np.log10(band[0]), np.log10(band[1]), bins + 1)
    which = np.digitize(radius, edges)
    xs, ys = [], []
    for b in range(1, bins + 1):
        sel = which == b
        if sel.sum() >= 4:
            xs.append(np.sqrt(edges[b - 1] * edges[b]))
            ys.append(flat[sel].mean())
    return float(np.polyfit(np.log10(xs), np.log10(ys), 1)[0])


def spectral_slope_check(
    field_count: int = 50,
    size: int = 256,
    seed: int = 99,
    tolerance: float = 0.3,
) -> CheckResult:
    """Raw fields must carry the Kolmogorov -11/3 slope in the mid band.

    The outer scale is pushed beyond the field size so the fitted decade
    sits between the roll-off and the aperture-smoothing scale; the
    smoothing itself (engine default) costs a small fraction of the
    tolerance at the top of the band.
    """
    params = TiltSpectrumParams(4.0 * size, 1.0)
    rng = np.random.default_rng(seed)
    band = (2.0 / size, 20.0 / size)
    slopes = [
        radial_psd_slope(synthesize_raw_field(size, size, params, rng)[..., 0], band)
        for _ in range(field_count)
    ]
    mean_slope = float(np.mean(slopes))
    passed = abs(mean_slope - params.spectral_exponent) <= tolerance
    return CheckResult(
        "spectral-slope",
        passed,
        f"mean slope {mean_slope:.3f} over {field_count} fields "
        f"(target {params.spectral_exponent:.3f} +/- {tolerance})",
    )


def roundtrip_check(
    image_count: int = 10,
    size: int = 256,
    tilt_rms_px: float = 2.0,
    seed: int = 7,
    residual_limit: float = 0.05,
    psnr_limit: float = 35.0,
) -> CheckResult:
    """Flow inversion must undo the warp on smooth images.

    Asserts the fixed-point residual of the inversion and the PSNR of
    warp-then-unwarp against the original.
    """
    rng = np.random.default_rng(seed)
    params = TiltSpectrumParams(96.0, tilt_rms_px)
    worst_residual = 0.0
    worst_psnr = np.inf
    for i in range(image_count):
        delta = synthesize_raw_field(size, size, params, rng)
        flow = forward_splat_invert(delta)
        residual = composition_residual(delta, flow)
        interior = np.zeros((size, size), bool)
        interior[4:-4, 4:-4] = True
        med = float(np.median(residual[flow.validity & interior]))
        worst_residual = max(worst_residual, med)

        image = smooth_test_image(size, size, seed=1000 + i)
        warped = backward_warp(image, delta)
        recovered = backward_warp(warped, flow.vectors)
        score = psnr(recovered[4:-4, 4:-4], image[4:-4, 4:-4])
        worst_psnr = min(worst_psnr, score)
    passed = worst_residual < residual_limit and worst_psnr > psnr_limit
    return CheckResult(
        "flow-roundtrip",
        passed,
        f"median residual worst {worst_residual:.4f} px (limit {residual_limit}), "
        f"roundtrip PSNR worst {worst_psnr:.2f} dB (limit > {psnr_limit})",
    )


def run_all(fast: bool = False) -> list[CheckResult]:
    if fast:
        # smaller draws/counts, but the field size stays at 256: the slope
        # band must sit between the outer roll-off and aperture smoothing
        return [
            variance_scaling_check(draws=2000, modes=15),
            spectral_slope_check(field_count=8, tolerance=0.35),
            roundtrip_check(image_count=2, size=128),
        ]
    return [variance_scaling_check(), spectral_slope_check(), roundtrip_check()]
