"""Diagnostic rendering: flow color wheel and side-by-side sample panels.

Flow visualization uses the standard optical-flow color wheel (the
Middlebury convention): hue encodes direction, saturation encodes
magnitude, and zero flow renders the neutral white wheel center.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

_SEGMENTS = (15, 6, 4, 11, 13, 6)  # RY, YG, GC, CB, BM, MR


def make_colorwheel() -> np.ndarray:
    """The 55-color direction wheel, rows RGB in [0, 255]."""
    ry, yg, gc, cb, bm, mr = _SEGMENTS
    wheel = np.zeros((sum(_SEGMENTS), 3))
    col = 0
    wheel[col : col + ry, 0] = 255
    wheel[col : col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 2] = 255
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col : col + mr, 0] = 255
    return wheel


def flow_to_color(flow: np.ndarray, max_norm: float | None = None) -> np.ndarray:
    """Map an (H, W, 2) flow field to an (H, W, 3) uint8 color image."""
    u = flow[..., 0].astype(np.float64)
    v = flow[..., 1].astype(np.float64)
    rad = np.hypot(u, v)
    if max_norm is None:
        max_norm = float(rad.max())
    scale = max_norm if max_norm > 0 else 1.0
    u = u / scale
    v = v / scale
    rad = np.hypot(u, v)

    wheel = make_colorwheel() / 255.0
    ncols = wheel.shape[0]
    angle = np.arctan2(-v, -u) / np.pi  # [-1, 1]
    fk = (angle + 1.0) / 2.0 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    frac = (fk - k0)[..., None]
    color = (1.0 - frac) * wheel[k0] + frac * wheel[k1]

    inside = rad <= 1.0
    color[inside] = 1.0 - rad[inside, None] * (1.0 - color[inside])
    color[~inside] *= 0.75
    return (255.0 * color + 0.5).astype(np.uint8)


def render_flow(flow: np.ndarray, out_path, max_norm: float | None = None) -> np.ndarray:
    """Write the flow visualization as PNG; returns the rendered array."""
    rgb = flow_to_color(flow, max_norm)
    Image.fromarray(rgb, mode="RGB").save(str(Path(out_path)), format="PNG")
    return rgb


_LABEL_HEIGHT = 12
_PAD = 4


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return (np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def render_panel(sample, out_path) -> np.ndarray:
    """Write a labeled 2x2 panel: clean / tilt on top, turb / flow below."""
    quads = [
        ("clean", _to_uint8(sample.clean)),
        ("tilt", _to_uint8(sample.tilt)),
        ("turb", _to_uint8(sample.turb)),
        ("flow", flow_to_color(sample.flow)),
    ]
    height, width = quads[0][1].shape[:2]
    cell_h = height + _LABEL_HEIGHT
    canvas = Image.new(
        "RGB",
        (2 * width + 3 * _PAD, 2 * cell_h + 3 * _PAD),
        color=(24, 24, 24),
    )
    draw = ImageDraw.Draw(canvas)
    for index, (label, pixels) in enumerate(quads):
        row, col = divmod(index, 2)
        x0 = _PAD + col * (width + _PAD)
        y0 = _PAD + row * (cell_h + _PAD)
        draw.text((x0 + 1, y0), f"{label} {sample.sample_id}", fill=(230, 230, 230))
        canvas.paste(Image.fromarray(pixels, mode="RGB"), (x0, y0 + _LABEL_HEIGHT))
    canvas.save(str(Path(out_path)), format="PNG")
    return np.array(canvas)
