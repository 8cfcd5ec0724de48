"""Zernike wavefront basis, Kolmogorov coefficient statistics, and PSF grids.

The blur half of the degradation is driven by random optical aberrations
expressed in the Zernike basis over the pupil (Noll's single-index
ordering). Coefficient statistics follow the Kolmogorov spectrum: the
covariance between two modes of equal azimuthal frequency has the classic
closed form in gamma functions, and every entry scales as
``(D/r0) ** (5/3)``.

A point-spread function is synthesized from a coefficient draw by Fourier
optics: embed the phase-aberrated pupil in a padded grid, take the squared
magnitude of its FFT, and crop a normalized kernel. Tip and tilt (Noll 2-3)
never enter the synthesis; wavefront tilt is realized downstream as image
displacement, and double-counting it here would couple the blur and warp
stages that the engine keeps decoupled. For the same reason the residual
mean phase gradient is removed before the FFT, which pins the kernel
centroid to the geometric center.

Spatial variation across the field of view is realized as a coarse grid of
kernels at anchor points; anchors share a configurable correlation length
so nearby patches see similar aberrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .config import ZernikeSettings
from .errors import DomainError, InternalConsistencyError, InvalidInputError
from .validation import as_generator

# Kolmogorov phase-spectrum coefficient (the exact value usually quoted
# as 0.023) and the covariance prefactor that follows from it.
KOLMOGOROV_SPECTRUM_COEFF = (
    (24.0 / 5.0 * gamma(6.0 / 5.0)) ** (5.0 / 6.0)
    * gamma(11.0 / 6.0) ** 2
    / (2.0 * math.pi ** (11.0 / 3.0))
)
_COV_PREFACTOR = (
    KOLMOGOROV_SPECTRUM_COEFF * 2.0 ** (-5.0 / 3.0) * math.pi ** (8.0 / 3.0) * gamma(14.0 / 3.0)
)

# Fraction of PSF energy the crop must capture before a warning is recorded.
CROP_ENERGY_THRESHOLD = 0.95


def noll_to_nm(j: int) -> tuple[int, int]:
    """Map a Noll index (1-based) to radial order n and signed frequency m.

    Noll's convention: within a radial order, |m| ascends; even indices get
    the cosine (+m) mode and odd indices the sine (-m) mode.
    """
    if j < 1:
        raise DomainError(f"Noll index must be >= 1, got {j}")
    n = 0
    remainder = j - 1
    while remainder > n:
        n += 1
        remainder -= n
    m = (-1) ** j * ((n % 2) + 2 * ((remainder + ((n + 1) % 2)) // 2))
    return n, int(m)


def _radial_polynomial(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in range((n - m) // 2 + 1):
        coeff = (
            (-1.0) ** k
            * math.factorial(n - k)
            / (
                math.factorial(k)
                * math.factorial((n + m) // 2 - k)
                * math.factorial((n - m) // 2 - k)
            )
        )
        out += coeff * rho ** (n - 2 * k)
    return out


@dataclass(frozen=True)
class ZernikeBasis:
    """Precomputed Zernike modes over a discretized unit disk.

    ``values[j-1]`` holds Noll mode j evaluated on a pupil_resolution^2
    grid, zero outside the disk. Modes are unit-normalized: the mean of
    Z_j * Z_k over the disk is the identity to discretization accuracy.
    """

    mode_count: int
    pupil_resolution: int
    values: np.ndarray = field(repr=False)  # (J, P, P)
    disk: np.ndarray = field(repr=False)  # (P, P) bool

    def inner_product(self, i: int, j: int) -> float:
        """Disk-area-normalized inner product of Noll modes i and j."""
        sel = self.disk
        return float((self.values[i - 1][sel] * self.values[j - 1][sel]).mean())


def build_basis(mode_count: int, pupil_resolution: int) -> ZernikeBasis:
    """Evaluate Noll modes 1..J on the discretized unit disk."""
    if mode_count < 1:
        raise DomainError("mode_count must be >= 1")
    if pupil_resolution < 32:
        raise DomainError("pupil_resolution must be >= 32")
    size = pupil_resolution
    center = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    x = (xx - center) / (size / 2.0)
    y = (yy - center) / (size / 2.0)
    rho = np.hypot(x, y)
    theta = np.arctan2(y, x)
    disk = rho <= 1.0

    values = np.zeros((mode_count, size, size))
    for j in range(1, mode_count + 1):
        n, m = noll_to_nm(j)
        radial = _radial_polynomial(n, abs(m), rho)
        if m == 0:
            mode = math.sqrt(n + 1.0) * radial
        elif m > 0:
            mode = math.sqrt(2.0 * (n + 1.0)) * radial * np.cos(abs(m) * theta)
        else:
            mode = math.sqrt(2.0 * (n + 1.0)) * radial * np.sin(abs(m) * theta)
        values[j - 1] = np.where(disk, mode, 0.0)
    return ZernikeBasis(mode_count, size, values, disk)


def _covariance_element(j: int, jp: int) -> float:
    """Kolmogorov covariance of Noll coefficients j, j' at D/r0 = 1.

    Nonzero only for equal |m| and matching trigonometric parity; piston
    is unobservable and excluded by the caller.
    """
    n, m = noll_to_nm(j)
    np_, mp = noll_to_nm(jp)
    if abs(m) != abs(mp):
        return 0.0
    if m != 0 and (j % 2) != (jp % 2):
        return 0.0
    return (
        _COV_PREFACTOR
        * math.sqrt((n + 1.0) * (np_ + 1.0))
        * (-1.0) ** ((n + np_ - 2 * abs(m)) // 2)
        * gamma((n + np_ - 5.0 / 3.0) / 2.0)
        / (
            gamma((n - np_ + 17.0 / 3.0) / 2.0)
            * gamma((np_ - n + 17.0 / 3.0) / 2.0)
            * gamma((n + np_ + 23.0 / 3.0) / 2.0)
        )
    )


def noll_covariance(mode_count: int, d_over_r0: float) -> np.ndarray:
    """Covariance matrix of Zernike coefficients under Kolmogorov statistics.

    Returns a symmetric positive-semidefinite (J, J) matrix in radians^2,
    scaled by ``(D/r0) ** (5/3)``. The piston row and column are zero.
    """
    if mode_count < 3:
        raise DomainError("mode_count must be >= 3")
    if d_over_r0 < 0.0:
        raise DomainError("d_over_r0 must be >= 0")
    cov = np.zeros((mode_count, mode_count))
    if d_over_r0 == 0.0:
        return cov
    scale = d_over_r0 ** (5.0 / 3.0)
    for j in range(2, mode_count + 1):
        for jp in range(j, mode_count + 1):
            val = _covariance_element(j, jp) * scale
            cov[j - 1, jp - 1] = val
            cov[jp - 1, j - 1] = val
    # Symmetric by construction; verify positive semidefiniteness.
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals.min() < -1e-9 * max(eigvals.max(), 1.0):
        raise InternalConsistencyError(
            f"covariance not PSD (min eigenvalue {eigvals.min():g})"
        )
    return cov


def tilt_variance(d_over_r0: float) -> float:
    """Per-axis variance of the tip/tilt coefficient, radians^2.

    Evaluates to about 0.449 * (D/r0)^(5/3); used to derive displacement
    RMS from turbulence strength when no explicit RMS is configured.
    """
    if d_over_r0 < 0.0:
        raise DomainError("d_over_r0 must be >= 0")
    return _covariance_element(2, 2) * d_over_r0 ** (5.0 / 3.0)


@dataclass
class AberrationSample:
    """One coefficient draw plus the strength it was drawn at."""

    coefficients: np.ndarray  # (J,), radians
    d_over_r0: float = math.nan


def _covariance_factor(cov: np.ndarray) -> np.ndarray:
    """Symmetric factor L with L @ L.T = cov, tolerant of zero modes."""
    try:
        eigvals, eigvecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise InternalConsistencyError(f"covariance factorization failed: {exc}") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    return eigvecs * np.sqrt(eigvals)


def sample_coefficients(
    cov: np.ndarray, rng, d_over_r0: float = math.nan
) -> AberrationSample:
    """Draw one zero-mean Gaussian coefficient vector with covariance ``cov``."""
    rng = as_generator(rng)
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise InvalidInputError("covariance must be a square matrix")
    factor = _covariance_factor(cov)
    draw = factor @ rng.standard_normal(cov.shape[0])
    return AberrationSample(draw, d_over_r0)


def sample_coefficient_batch(cov: np.ndarray, rng, count: int) -> np.ndarray:
    """Draw ``count`` coefficient vectors at once; rows are samples."""
    rng = as_generator(rng)
    factor = _covariance_factor(np.asarray(cov, dtype=np.float64))
    return rng.standard_normal((count, cov.shape[0])) @ factor.T


@dataclass
class Psf:
    """A normalized blur kernel with bookkeeping from the crop step."""

    kernel: np.ndarray  # (k, k), non-negative, sums to 1
    crop_energy: float = 1.0  # PSF energy fraction captured by the crop

    @property
    def crop_warning(self) -> bool:
        return self.crop_energy < CROP_ENERGY_THRESHOLD


def delta_kernel(kernel_size: int) -> np.ndarray:
    """Identity kernel: all energy in the central pixel."""
    k = np.zeros((kernel_size, kernel_size))
    k[kernel_size // 2, kernel_size // 2] = 1.0
    return k


def _synthesize_batch(
    coeffs: np.ndarray, basis: ZernikeBasis, kernel_size: int, oversample: int
) -> tuple[np.ndarray, np.ndarray]:
    """Fourier-optics synthesis of a batch of kernels.

    coeffs: (A, J) with tip/tilt already zeroed. Returns kernels
    (A, k, k) and the energy fraction captured by each crop.
    """
    size = basis.pupil_resolution
    if kernel_size % 2 == 0 or kernel_size < 1:
        raise DomainError("kernel_size must be odd and positive")
    fft_size = size * oversample
    if kernel_size > fft_size:
        raise DomainError("kernel_size exceeds the synthesized PSF support")

    phase = np.tensordot(coeffs, basis.values, axes=(1, 0))  # (A, P, P)

    # Remove the mean wavefront gradient over the disk: any leftover linear
    # component is image displacement, not blur, and it would drag the PSF
    # centroid off center.
    gy, gx = np.gradient(phase, axis=(1, 2))
    mean_gy = gy[:, basis.disk].mean(axis=1)
    mean_gx = gx[:, basis.disk].mean(axis=1)
    center = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    phase = phase - (
        mean_gx[:, None, None] * (xx - center) + mean_gy[:, None, None] * (yy - center)
    )

    pupil = np.zeros((coeffs.shape[0], fft_size, fft_size), dtype=np.complex128)
    lo = (fft_size - size) // 2
    pupil[:, lo : lo + size, lo : lo + size] = np.where(
        basis.disk, np.exp(1j * phase), 0.0
    )
    spectrum = np.fft.fftshift(
        np.fft.fft2(np.fft.ifftshift(pupil, axes=(1, 2)), axes=(1, 2)), axes=(1, 2)
    )
    psf = spectrum.real**2 + spectrum.imag**2
    psf /= psf.sum(axis=(1, 2), keepdims=True)

    # Recenter the crop on the (integer) centroid so no sub-pixel shift
    # leaks into the blur stage.
    half = kernel_size // 2
    coords = np.arange(fft_size)
    cy = np.rint((psf.sum(axis=2) * coords).sum(axis=1)).astype(int)
    cx = np.rint((psf.sum(axis=1) * coords).sum(axis=1)).astype(int)
    cy = np.clip(cy, half, fft_size - 1 - half)
    cx = np.clip(cx, half, fft_size - 1 - half)

    kernels = np.empty((coeffs.shape[0], kernel_size, kernel_size))
    captured = np.empty(coeffs.shape[0])
    for a in range(coeffs.shape[0]):
        crop = psf[a, cy[a] - half : cy[a] + half + 1, cx[a] - half : cx[a] + half + 1]
        captured[a] = crop.sum()
        kernels[a] = crop / crop.sum()
    return kernels, captured


def synthesize_psf(
    sample: AberrationSample | np.ndarray,
    basis: ZernikeBasis,
    kernel_size: int,
    oversample: int = 2,
) -> Psf:
    """Synthesize one blur kernel from an aberration sample.

    Tip/tilt coefficients (Noll 2-3) are zeroed before synthesis; the
    emitted kernel is non-negative with unit sum.
    """
    coeffs = np.asarray(
        sample.coefficients if isinstance(sample, AberrationSample) else sample,
        dtype=np.float64,
    )
    if coeffs.ndim != 1 or coeffs.shape[0] != basis.mode_count:
        raise InvalidInputError(
            f"coefficient vector length {coeffs.shape} does not match basis "
            f"mode count {basis.mode_count}"
        )
    coeffs = coeffs.copy()
    coeffs[0] = 0.0  # piston shifts global phase only
    if basis.mode_count >= 3:
        coeffs[1:3] = 0.0  # tilt is realized as displacement, not blur
    kernels, captured = _synthesize_batch(coeffs[None], basis, kernel_size, oversample)
    return Psf(kernels[0], float(captured[0]))


@dataclass
class PsfGrid:
    """Blur kernels on a coarse anchor grid covering the image plane.

    Anchors span the image inclusive of its borders, so every pixel lies
    in a cell with four enclosing anchors (degenerate at the borders).
    """

    kernels: np.ndarray  # (Gy, Gx, k, k)
    anchors_y: np.ndarray  # (Gy,) pixel coordinates
    anchors_x: np.ndarray  # (Gx,)
    d_over_r0: float
    crop_warnings: int = 0

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[2]


def _anchor_mixing_matrix(grid_shape: tuple[int, int], correlation: float) -> np.ndarray:
    """Mixing matrix turning iid anchor draws into spatially correlated ones.

    Gaussian weights over anchor-grid distance, normalized per row, then
    rescaled so each output keeps unit marginal variance. correlation = 0
    leaves anchors independent; correlation = inf makes them identical.
    """
    rows, cols = grid_shape
    count = rows * cols
    if correlation == 0.0:
        return np.eye(count)
    gy, gx = np.mgrid[0:rows, 0:cols]
    pos = np.stack([gy.ravel(), gx.ravel()], axis=1).astype(np.float64)
    if math.isinf(correlation):
        weights = np.full((count, count), 1.0 / count)
    else:
        dist2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
        weights = np.exp(-0.5 * dist2 / correlation**2)
        weights /= weights.sum(axis=1, keepdims=True)
    # Unit output variance: divide each row by sqrt(sum of squared weights).
    return weights / np.sqrt((weights**2).sum(axis=1, keepdims=True))


def build_psf_grid(
    image_shape: tuple[int, int],
    settings: ZernikeSettings,
    d_over_r0: float,
    rng,
    basis: ZernikeBasis | None = None,
) -> PsfGrid:
    """Sample a spatially correlated grid of blur kernels for one image.

    At ``d_over_r0 == 0`` there is no turbulence to synthesize and every
    anchor holds the identity kernel (turbulence-free optics resolve below
    the pixel grid by construction of the engine's plate scale).
    """
    rows, cols = settings.grid_shape
    if rows < 2 or cols < 2:
        raise DomainError("PSF grid must be at least 2 x 2")
    height, width = image_shape
    anchors_y = np.linspace(0.0, height - 1.0, rows)
    anchors_x = np.linspace(0.0, width - 1.0, cols)

    if d_over_r0 == 0.0:
        kernels = np.broadcast_to(
            delta_kernel(settings.kernel_size), (rows, cols, settings.kernel_size, settings.kernel_size)
        ).copy()
        return PsfGrid(kernels, anchors_y, anchors_x, d_over_r0, 0)

    rng = as_generator(rng)
    if basis is None:
        basis = build_basis(settings.modes, settings.pupil_resolution)
    cov = noll_covariance(settings.modes, d_over_r0)
    factor = _covariance_factor(cov)

    draws = rng.standard_normal((rows * cols, settings.modes))
    mixing = _anchor_mixing_matrix((rows, cols), settings.anchor_correlation)
    coeffs = (mixing @ draws) @ factor.T
    coeffs[:, 0] = 0.0
    coeffs[:, 1:3] = 0.0

    kernels, captured = _synthesize_batch(
        coeffs, basis, settings.kernel_size, settings.oversample
    )
    warnings = int((captured < CROP_ENERGY_THRESHOLD).sum())
    return PsfGrid(
        kernels.reshape(rows, cols, settings.kernel_size, settings.kernel_size),
        anchors_y,
        anchors_x,
        d_over_r0,
        warnings,
    )
