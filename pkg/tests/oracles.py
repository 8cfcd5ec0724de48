"""Independent oracle implementations used to freeze expected values.

Everything here is deliberately written against the *definitions* (brute
force enumeration, quadrature, dense loops) rather than reusing any code
path from the package, so a bug in the implementation cannot hide in its
own test.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, jv


def noll_enumeration(j_max):
    """Brute-force Noll table: ascending n, ascending |m|, sign by j parity."""
    table = {}
    j = 1
    n = 0
    while j <= j_max:
        for abs_m in sorted({abs(m) for m in range(-n, n + 1) if (n - abs(m)) % 2 == 0}):
            if abs_m == 0:
                table[j] = (n, 0)
                j += 1
            else:
                first = abs_m if j % 2 == 0 else -abs_m
                table[j] = (n, first)
                j += 1
                if j <= j_max:
                    table[j] = (n, -first)
                    j += 1
        n += 1
    return table


# Kolmogorov phase-spectrum coefficient, frequency in cycles per meter.
PHASE_SPECTRUM_COEFF = (
    (24.0 / 5.0 * gamma(6.0 / 5.0)) ** (5.0 / 6.0)
    * gamma(11.0 / 6.0) ** 2
    / (2.0 * math.pi ** (11.0 / 3.0))
)


def noll_covariance_integral(j, jp, d_over_r0=1.0):
    """Covariance of Noll coefficients via the radial Bessel integral.

    Independent of the closed-form gamma expression: integrates
    J_{n+1}(x) J_{n'+1}(x) x^(-14/3) numerically.
    """
    table = noll_enumeration(max(j, jp))
    n, m = table[j]
    np_, mp = table[jp]
    if j == 1 or jp == 1:
        return 0.0
    if abs(m) != abs(mp):
        return 0.0
    if m != 0 and (j % 2) != (jp % 2):
        return 0.0
    integrand = lambda x: jv(n + 1, x) * jv(np_ + 1, x) * x ** (-14.0 / 3.0)
    head, _ = quad(integrand, 0.0, 60.0, limit=800)
    tail, _ = quad(integrand, 60.0, 400.0, limit=800)
    sign = (-1.0) ** ((n + np_ - 2 * abs(m)) // 2)
    return (
        PHASE_SPECTRUM_COEFF
        * 8.0
        * math.pi ** (8.0 / 3.0)
        * math.sqrt((n + 1.0) * (np_ + 1.0))
        * sign
        * (head + tail)
        * d_over_r0 ** (5.0 / 3.0)
    )


def dense_convolve_reflect(image, kernel):
    """Direct nested-loop convolution with reflect padding (no FFT)."""
    k = kernel.shape[0]
    margin = k // 2
    if image.ndim == 2:
        image = image[..., None]
        squeeze = True
    else:
        squeeze = False
    padded = np.pad(image, ((margin, margin), (margin, margin), (0, 0)), mode="reflect")
    height, width, channels = image.shape
    out = np.zeros_like(image)
    flipped = kernel[::-1, ::-1]
    for y in range(height):
        for x in range(width):
            patch = padded[y : y + k, x : x + k, :]
            for c in range(channels):
                out[y, x, c] = float((patch[..., c] * flipped).sum())
    return out[..., 0] if squeeze else out


def reference_warp(image, delta):
    """Per-pixel bilinear warp with border clamp, written as plain loops."""
    if image.ndim == 2:
        image = image[..., None]
        squeeze = True
    else:
        squeeze = False
    height, width, channels = image.shape
    out = np.zeros_like(image)
    for y in range(height):
        for x in range(width):
            sx = min(max(x + delta[y, x, 0], 0.0), width - 1.0)
            sy = min(max(y + delta[y, x, 1], 0.0), height - 1.0)
            x0 = min(int(math.floor(sx)), width - 2) if width > 1 else 0
            y0 = min(int(math.floor(sy)), height - 2) if height > 1 else 0
            fx = sx - x0
            fy = sy - y0
            for c in range(channels):
                out[y, x, c] = (
                    image[y0, x0, c] * (1 - fx) * (1 - fy)
                    + image[y0, x0 + 1, c] * fx * (1 - fy)
                    + image[y0 + 1, x0, c] * (1 - fx) * fy
                    + image[y0 + 1, x0 + 1, c] * fx * fy
                )
    return out[..., 0] if squeeze else out


def reference_splat(delta):
    """Loop-based forward splat of -delta with bilinear weights."""
    height, width = delta.shape[:2]
    pad = int(math.ceil(float(np.abs(delta).max()))) + 1
    big_h, big_w = height + 2 * pad, width + 2 * pad
    num = np.zeros((big_h, big_w, 2))
    den = np.zeros((big_h, big_w))
    for y in range(height):
        for x in range(width):
            tx = x + delta[y, x, 0] + pad
            ty = y + delta[y, x, 1] + pad
            x0 = int(math.floor(tx))
            y0 = int(math.floor(ty))
            fx = tx - x0
            fy = ty - y0
            for oy, wy in ((0, 1 - fy), (1, fy)):
                for ox, wx in ((0, 1 - fx), (1, fx)):
                    w = wx * wy
                    den[y0 + oy, x0 + ox] += w
                    num[y0 + oy, x0 + ox, 0] += w * (-delta[y, x, 0])
                    num[y0 + oy, x0 + ox, 1] += w * (-delta[y, x, 1])
    den_c = den[pad : pad + height, pad : pad + width]
    num_c = num[pad : pad + height, pad : pad + width]
    valid = den_c > 1e-4
    out = np.zeros((height, width, 2))
    out[valid] = num_c[valid] / den_c[valid][:, None]
    return out, valid, float(den.sum())


def quadrature_inner_product(j, jp, resolution=2048):
    """Zernike mode inner product over the disk by fine-grid quadrature."""
    from d2turb import build_basis

    basis = build_basis(max(j, jp), resolution)
    return basis.inner_product(j, jp)
