"""Bit-exact persistence: PNG images, D2FL flow files, JSON metadata.

Everything written here must be reproducible byte-for-byte across
platforms and runs:

* flow fields use a fixed little-endian binary layout (the ``D2FL``
  format below);
* images are PNG, 8-bit RGB for the sample tuple and 8/16-bit grayscale
  for depth, encoded with rounding half away from zero;
* JSON is emitted with sorted keys and floats at 17 significant digits so
  identical records always hash identically.

D2FL layout (all integers little-endian unsigned 32-bit):

    bytes 0..3    magic "D2FL"
    bytes 4..7    version = 1
    bytes 8..11   height
    bytes 12..15  width
    bytes 16..19  channels = 2
    bytes 20..    row-major float32 LE payload, pixel-interleaved (dx, dy)
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    FlowMagicError,
    FlowTruncatedError,
    FlowVersionError,
    ImageFormatError,
    InvalidInputError,
    SinkError,
)

FLOW_MAGIC = b"D2FL"
FLOW_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

META_FILENAME = "meta.json"
MANIFEST_FILENAME = "manifest.json"
SAMPLE_FILES = ("clean.png", "flow_bwd.d2fl", "tilt.png", "turb.png")

FORMAT_VERSIONS = {"d2fl": FLOW_VERSION, "meta": 1, "manifest": 1}


# ---------------------------------------------------------------------------
# flow fields
# ---------------------------------------------------------------------------

def flow_to_bytes(field: np.ndarray) -> bytes:
    field = np.asarray(field)
    if field.ndim != 3 or field.shape[2] != 2:
        raise InvalidInputError(f"flow field must have shape (H, W, 2), got {field.shape}")
    if not np.all(np.isfinite(field)):
        raise InvalidInputError("flow field contains non-finite values")
    height, width = field.shape[:2]
    header = _HEADER.pack(FLOW_MAGIC, FLOW_VERSION, height, width, 2)
    payload = np.ascontiguousarray(field, dtype="<f4").tobytes()
    return header + payload


def write_flow(path, field: np.ndarray) -> None:
    data = flow_to_bytes(field)
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise SinkError(f"cannot write flow file {path}: {exc}") from exc


def flow_from_bytes(data: bytes, source: str = "<bytes>") -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FlowTruncatedError(
            f"{source}: expected at least {_HEADER.size} header bytes, got {len(data)}"
        )
    magic, version, height, width, channels = _HEADER.unpack_from(data)
    if magic != FLOW_MAGIC:
        raise FlowMagicError(f"{source}: bad magic {magic!r}, expected {FLOW_MAGIC!r}")
    if version != FLOW_VERSION:
        raise FlowVersionError(f"{source}: unsupported version {version}")
    if channels != 2:
        raise FlowVersionError(f"{source}: unsupported channel count {channels}")
    expected = _HEADER.size + height * width * 2 * 4
    if len(data) != expected:
        raise FlowTruncatedError(
            f"{source}: expected {expected} bytes, got {len(data)}"
        )
    payload = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return payload.reshape(height, width, 2).astype(np.float32)


def read_flow(path) -> np.ndarray:
    return flow_from_bytes(Path(path).read_bytes(), source=str(path))


# ---------------------------------------------------------------------------
# images
# ---------------------------------------------------------------------------

def encode_unit_to_int(values: np.ndarray, bit_depth: int) -> np.ndarray:
    """Quantize [0, 1] floats, rounding half away from zero."""
    peak = float(2**bit_depth - 1)
    scaled = np.floor(np.asarray(values, dtype=np.float64) * peak + 0.5)
    return np.clip(scaled, 0, peak).astype(np.uint8 if bit_depth == 8 else np.uint16)


def write_image(path, image: np.ndarray, bit_depth: int = 8) -> None:
    """Write a [0, 1] float image as PNG (RGB at 8-bit, grayscale at 8/16)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[2] == 3:
        if bit_depth != 8:
            raise ImageFormatError("RGB images are written at 8-bit only")
        pil = Image.fromarray(encode_unit_to_int(image, 8), mode="RGB")
    elif image.ndim == 2:
        if bit_depth == 8:
            pil = Image.fromarray(encode_unit_to_int(image, 8), mode="L")
        elif bit_depth == 16:
            pil = Image.fromarray(encode_unit_to_int(image, 16))
        else:
            raise ImageFormatError(f"unsupported bit depth {bit_depth}")
    else:
        raise ImageFormatError(f"unsupported image shape {image.shape}")
    try:
        pil.save(str(path), format="PNG")
    except OSError as exc:
        raise SinkError(f"cannot write image {path}: {exc}") from exc


def read_image(path) -> np.ndarray:
    """Read a PNG into a [0, 1] float array; (H, W, 3) RGB or (H, W) gray."""
    with Image.open(str(path)) as pil:
        mode = pil.mode
        arr = np.array(pil)
    if mode == "RGB":
        return arr.astype(np.float64) / 255.0
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I"):
        return arr.astype(np.float64) / 65535.0
    raise ImageFormatError(f"{path}: unsupported PNG color type {mode!r}")


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------

def _canonical_fragment(value, out: list) -> None:
    if isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if not isinstance(key, str):
                raise InvalidInputError("JSON object keys must be strings")
            if i:
                out.append(", ")
            out.append(json.dumps(key))
            out.append(": ")
            _canonical_fragment(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(", ")
            _canonical_fragment(item, out)
        out.append("]")
    elif isinstance(value, bool) or value is None:
        out.append(json.dumps(value))
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        value = float(value)
        if not np.isfinite(value):
            raise InvalidInputError("non-finite floats are not serializable")
        out.append(format(value, ".17g"))
    elif isinstance(value, str):
        out.append(json.dumps(value, ensure_ascii=False))
    else:
        raise InvalidInputError(f"cannot serialize {type(value)!r} to JSON")


def canonical_json(value) -> str:
    """Serialize with sorted keys and 17-significant-digit floats."""
    out: list[str] = []
    _canonical_fragment(value, out)
    return "".join(out) + "\n"


def write_json(path, value) -> None:
    try:
        Path(path).write_bytes(canonical_json(value).encode("utf-8"))
    except OSError as exc:
        raise SinkError(f"cannot write {path}: {exc}") from exc


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# sample persistence
# ---------------------------------------------------------------------------

def content_digest(sample_dir: Path) -> str:
    """SHA-256 over the payload files in fixed (sorted) order."""
    digest = hashlib.sha256()
    for name in SAMPLE_FILES:
        digest.update((Path(sample_dir) / name).read_bytes())
    return digest.hexdigest()


def write_sample(sample_dir, sample, *, engine_version: str, debug: bool = False) -> dict:
    """Persist a degraded sample tuple; returns the completed metadata.

    The metadata digest covers the four payload files, so it is computed
    after they hit the disk and meta.json is written last.
    """
    sample_dir = Path(sample_dir)
    sample_dir.mkdir(parents=True, exist_ok=True)
    write_image(sample_dir / "turb.png", sample.turb)
    write_image(sample_dir / "tilt.png", sample.tilt)
    write_image(sample_dir / "clean.png", sample.clean)
    write_flow(sample_dir / "flow_bwd.d2fl", sample.backward_flow.vectors)
    if sample.blur is not None:
        write_image(sample_dir / "blur.png", sample.blur)
    if debug:
        write_flow(sample_dir / "flow_fwd.d2fl", sample.forward_displacement)
        write_image(sample_dir / "modulation.png", sample.modulation, bit_depth=16)

    meta = dict(sample.metadata)
    meta["engine_version"] = engine_version
    meta["content_digest"] = content_digest(sample_dir)
    write_json(sample_dir / META_FILENAME, meta)
    return meta
