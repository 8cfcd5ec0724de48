"""Sample loading with cross-validation against the metadata record.

A sample directory holds the degraded/tilt/clean image triple, the
backward supervision flow, and a metadata record carrying the turbulence
strength, its category, and a content digest over the payload files.
``load_sample`` refuses to return a tuple whose bytes or fields disagree
with that record, so a training pipeline can assume integrity after
loading. Loads never mutate files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import formats
from .errors import ConsistencyError, IntegrityError, InvalidDatasetError

log = logging.getLogger("d2turb_dataset")

MANIFEST_FILENAME = "manifest.json"
META_FILENAME = "meta.json"

WEAK_MEDIUM_BOUNDARY = 2.25
MEDIUM_STRONG_BOUNDARY = 3.75

CATEGORIES = ("weak", "medium", "strong")


def categorize_strength(d_over_r0: float) -> str:
    """Strength taxonomy; boundary values belong to ``medium``."""
    if d_over_r0 < WEAK_MEDIUM_BOUNDARY:
        return "weak"
    if d_over_r0 <= MEDIUM_STRONG_BOUNDARY:
        return "medium"
    return "strong"


@dataclass
class SampleView:
    """One decoded training tuple."""

    turb: np.ndarray  # (H, W, 3) float in [0, 1]
    tilt: np.ndarray
    clean: np.ndarray
    flow: np.ndarray  # (H, W, 2) float32, backward flow
    meta: dict

    @property
    def sample_id(self) -> str:
        return self.meta["sample_id"]

    @property
    def category(self) -> str:
        return self.meta["category"]


def load_sample(sample_dir, verify_digest: bool = True) -> SampleView:
    """Load and cross-validate the five artifacts of one sample."""
    sample_dir = Path(sample_dir)
    meta = formats.read_json(sample_dir / META_FILENAME)

    if verify_digest:
        digest = formats.content_digest(sample_dir)
        if digest != meta.get("content_digest"):
            raise IntegrityError(
                f"{sample_dir}: content digest mismatch "
                f"(files {digest[:12]}..., metadata {str(meta.get('content_digest'))[:12]}...)"
            )

    expected_category = categorize_strength(float(meta["d_over_r0"]))
    if meta.get("category") != expected_category:
        raise ConsistencyError(
            f"{sample_dir}: category {meta.get('category')!r} inconsistent with "
            f"d_over_r0 {meta['d_over_r0']:g} (expected {expected_category!r})"
        )

    turb = formats.read_image(sample_dir / "turb.png")
    tilt = formats.read_image(sample_dir / "tilt.png")
    clean = formats.read_image(sample_dir / "clean.png")
    flow = formats.read_flow(sample_dir / "flow_bwd.d2fl")

    shape = (int(meta["height"]), int(meta["width"]))
    for name, arr in (("turb", turb), ("tilt", tilt), ("clean", clean), ("flow", flow)):
        if arr.shape[:2] != shape:
            raise ConsistencyError(
                f"{sample_dir}: {name} shape {arr.shape[:2]} does not match metadata {shape}"
            )
    return SampleView(turb, tilt, clean, flow, meta)


def iterate_dataset(
    root, category: str | None = None, verify_digest: bool = True
) -> Iterator[SampleView]:
    """Yield samples in sorted sample_id order, optionally category-filtered.

    A directory without a manifest is only acceptable when it holds no
    samples at all (an empty stream with a warning); anything else is an
    invalid dataset.
    """
    root = Path(root)
    if category is not None and category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    manifest_path = root / MANIFEST_FILENAME
    if not manifest_path.exists():
        has_samples = any(
            (p / META_FILENAME).exists() for p in root.iterdir() if p.is_dir()
        ) if root.exists() else False
        if has_samples:
            raise InvalidDatasetError(f"{root}: samples present but no {MANIFEST_FILENAME}")
        log.warning("%s: no manifest and no samples; empty dataset", root)
        return
    manifest = formats.read_json(manifest_path)
    for entry in sorted(manifest.get("samples", []), key=lambda e: e["sample_id"]):
        if category is not None and categorize_strength(float(entry["d_over_r0"])) != category:
            continue
        yield load_sample(root / entry["sample_id"], verify_digest=verify_digest)
