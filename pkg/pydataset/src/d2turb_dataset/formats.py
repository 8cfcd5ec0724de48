"""Readers for the dataset's wire formats: D2FL flow files and PNG images.

This package consumes datasets purely through their file formats; it
shares no code with the generator. The D2FL layout (little-endian):

    bytes 0..3    magic "D2FL"
    bytes 4..7    u32 version = 1
    bytes 8..11   u32 height
    bytes 12..15  u32 width
    bytes 16..19  u32 channels = 2
    bytes 20..    row-major float32 pairs (dx, dy); +x right, +y down
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetFormatError

FLOW_MAGIC = b"D2FL"
FLOW_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

PAYLOAD_FILES = ("clean.png", "flow_bwd.d2fl", "tilt.png", "turb.png")


def read_flow(path) -> np.ndarray:
    """Decode a D2FL file into an (H, W, 2) float32 array."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DatasetFormatError(f"{path}: shorter than the {_HEADER.size}-byte header")
    magic, version, height, width, channels = _HEADER.unpack_from(data)
    if magic != FLOW_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != FLOW_VERSION or channels != 2:
        raise DatasetFormatError(
            f"{path}: unsupported version {version} / channels {channels}"
        )
    expected = _HEADER.size + height * width * 8
    if len(data) != expected:
        raise DatasetFormatError(f"{path}: expected {expected} bytes, got {len(data)}")
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(height, width, 2).astype(np.float32)


def flow_payload_floats(path) -> np.ndarray:
    """The raw payload reinterpreted as float32, header skipped, no reshape."""
    return np.frombuffer(Path(path).read_bytes(), dtype="<f4", offset=_HEADER.size)


def read_image(path) -> np.ndarray:
    """Decode a PNG into [0, 1] floats; (H, W, 3) RGB or (H, W) grayscale."""
    with Image.open(str(path)) as pil:
        mode = pil.mode
        arr = np.array(pil)
    if mode in ("RGB", "L"):
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I"):
        return arr.astype(np.float64) / 65535.0
    raise DatasetFormatError(f"{path}: unsupported PNG color type {mode!r}")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON: {exc}") from exc


def content_digest(sample_dir) -> str:
    """SHA-256 over the payload files in their fixed (sorted) order."""
    digest = hashlib.sha256()
    for name in PAYLOAD_FILES:
        digest.update((Path(sample_dir) / name).read_bytes())
    return digest.hexdigest()
