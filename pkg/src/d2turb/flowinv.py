"""Inversion of a forward displacement field into a backward flow.

The degradation warps images through a forward field: output pixel x reads
from ``x + delta(x)``. Training a rectifier needs the opposite mapping — a
backward flow V with ``warp(warped, V) ~ original`` — which satisfies the
fixed-point relation ``delta(x) + V(x + delta(x)) = 0``.

The inversion forward-splats ``-delta(x)`` to the target location
``x + delta(x)``: each source pixel distributes unit mass to the four
surrounding integer pixels with bilinear weights, accumulations are
normalized by total weight, and uncovered pixels (disocclusions) are
filled by iterative neighbor averaging. Splatting collisions are resolved
by weighted averaging — the displacement field carries no depth ordering
of its own, so no z-buffering applies.

Accumulation is implemented as flat bincount sums, which are deterministic
regardless of how callers parallelize across samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnfillableError
from .validation import ensure_field

# Accumulated weight below this is a genuine coverage hole rather than a
# numerically tiny-but-real contribution.
COVERAGE_EPSILON = 1e-4

FILL_MAX_ITERATIONS = 64
_FILL_TOLERANCE = 1e-9


@dataclass
class BackwardFlow:
    """A backward flow field plus the pre-fill coverage mask."""

    vectors: np.ndarray  # (H, W, 2), pixel units
    validity: np.ndarray  # (H, W) bool, True where splats landed


def splat_weights(delta: np.ndarray, pad: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bilinear forward-splat accumulation onto a padded buffer.

    The padding must cover the largest displacement so every source pixel
    deposits its full unit mass somewhere: the returned weight buffer sums
    to exactly H * W (up to roundoff). Returns (weights, accum_x, accum_y)
    of shape (H + 2 pad, W + 2 pad), where the accumulators hold the
    weighted sums of the negated displacement.
    """
    height, width = delta.shape[:2]
    big_h, big_w = height + 2 * pad, width + 2 * pad

    yy, xx = np.mgrid[0:height, 0:width]
    tx = (xx + delta[..., 0] + pad).ravel()
    ty = (yy + delta[..., 1] + pad).ravel()
    x0 = np.floor(tx).astype(np.intp)
    y0 = np.floor(ty).astype(np.intp)
    fx = tx - x0
    fy = ty - y0

    value_x = (-delta[..., 0]).ravel()
    value_y = (-delta[..., 1]).ravel()

    total = big_h * big_w
    weight_sum = np.zeros(total)
    accum_x = np.zeros(total)
    accum_y = np.zeros(total)
    for off_y, wy in ((0, 1.0 - fy), (1, fy)):
        for off_x, wx in ((0, 1.0 - fx), (1, fx)):
            w = wx * wy
            idx = (y0 + off_y) * big_w + (x0 + off_x)
            weight_sum += np.bincount(idx, weights=w, minlength=total)
            accum_x += np.bincount(idx, weights=w * value_x, minlength=total)
            accum_y += np.bincount(idx, weights=w * value_y, minlength=total)
    shape = (big_h, big_w)
    return weight_sum.reshape(shape), accum_x.reshape(shape), accum_y.reshape(shape)


def forward_splat_invert(
    delta: np.ndarray,
    coverage_epsilon: float = COVERAGE_EPSILON,
    fill: bool = True,
) -> BackwardFlow:
    """Invert a forward displacement field by bilinear forward splatting."""
    delta = ensure_field(delta, "displacement")
    height, width = delta.shape[:2]

    # Splat into a padded buffer so mass leaving the image is still
    # accumulated (total splatted weight is exactly H * W).
    pad = int(np.ceil(np.abs(delta).max())) + 1
    weight_sum, accum_x, accum_y = splat_weights(delta, pad)

    weight_sum = weight_sum[pad : pad + height, pad : pad + width]
    accum_x = accum_x[pad : pad + height, pad : pad + width]
    accum_y = accum_y[pad : pad + height, pad : pad + width]

    valid = weight_sum > coverage_epsilon
    vectors = np.zeros((height, width, 2))
    vectors[valid, 0] = accum_x[valid] / weight_sum[valid]
    vectors[valid, 1] = accum_y[valid] / weight_sum[valid]

    flow = BackwardFlow(vectors, valid)
    if fill and not valid.all():
        flow = fill_holes(flow)
    return flow


def fill_holes(flow: BackwardFlow, max_iterations: int = FILL_MAX_ITERATIONS) -> BackwardFlow:
    """Fill invalid flow pixels by iterative 4-neighbor averaging.

    Valid pixels are untouched bitwise; the validity mask in the result
    still records the original coverage. Each sweep replaces every hole
    that has at least one already-known neighbor with the mean of its
    known neighbors; holes grow inward first, then relax toward the
    harmonic fill until values stop changing or the iteration cap.
    """
    valid = flow.validity
    if not valid.any():
        raise UnfillableError("flow field has no valid pixels to fill from")
    if valid.all():
        return flow

    known = valid.copy()
    values = np.where(valid[..., None], flow.vectors, 0.0)
    for _ in range(max_iterations):
        neighbor_sum = np.zeros_like(values)
        neighbor_cnt = np.zeros(valid.shape)
        for src, dst in (
            (np.s_[1:, :], np.s_[:-1, :]),
            (np.s_[:-1, :], np.s_[1:, :]),
            (np.s_[:, 1:], np.s_[:, :-1]),
            (np.s_[:, :-1], np.s_[:, 1:]),
        ):
            neighbor_sum[dst] += values[src] * known[src][..., None]
            neighbor_cnt[dst] += known[src]
        holes = (~valid) & (neighbor_cnt > 0)
        if not holes.any():
            break
        new_values = neighbor_sum[holes] / neighbor_cnt[holes][:, None]
        grew = not known[holes].all()
        change = np.abs(new_values - values[holes]).max()
        values[holes] = new_values
        known |= holes
        if not grew and change < _FILL_TOLERANCE:
            break

    vectors = flow.vectors.copy()
    vectors[~valid] = values[~valid]
    return BackwardFlow(vectors, flow.validity)


def composition_residual(delta: np.ndarray, flow: BackwardFlow) -> np.ndarray:
    """Magnitude of ``delta(x) + V(x + delta(x))`` per pixel.

    The fixed-point residual of the inversion; near zero wherever the
    forward field is smooth and the target location was covered.
    """
    from .degrade import backward_warp  # local import to avoid a cycle

    sampled = backward_warp(flow.vectors, delta)
    return np.hypot(delta[..., 0] + sampled[..., 0], delta[..., 1] + sampled[..., 1])
