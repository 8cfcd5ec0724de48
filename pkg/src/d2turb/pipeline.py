"""Dataset orchestration: strength taxonomy, seeding, generation, metrics.

Reproducibility contract: every sample's randomness derives from a stable
64-bit mix of (global seed, sample index), never from generation order.
Workers own their samples end to end and write into per-sample
directories; the manifest is written last by the coordinator, so an
interrupted run leaves a manifest-less (hence invalid) dataset rather
than a silently short one.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Literal

import numpy as np
from scipy.signal import fftconvolve

from .config import OpticalConfig, config_to_dict
from .degrade import CleanScene, DegradedSample, degrade_scene
from .errors import DatasetError, DomainError, ImageFormatError, InvalidInputError, ShapeError
from .flowinv import COVERAGE_EPSILON
from . import formats
from .version import ENGINE_VERSION

log = logging.getLogger("d2turb")

StrengthCategory = Literal["weak", "medium", "strong"]

WEAK_MEDIUM_BOUNDARY = 2.25
MEDIUM_STRONG_BOUNDARY = 3.75

_MASK64 = (1 << 64) - 1


def categorize_strength(d_over_r0: float) -> StrengthCategory:
    """Strength taxonomy; the boundary values belong to ``medium``."""
    if d_over_r0 < 0.0 or math.isnan(d_over_r0):
        raise DomainError("d_over_r0 must be >= 0")
    if d_over_r0 < WEAK_MEDIUM_BOUNDARY:
        return "weak"
    if d_over_r0 <= MEDIUM_STRONG_BOUNDARY:
        return "medium"
    return "strong"


def _splitmix64(x: int) -> int:
    x &= _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return x ^ (x >> 31)


def mix_seed(global_seed: int, sample_index: int, stream: int = 0) -> int:
    """Stable 64-bit seed for (sample, stream); injective in the index."""
    if sample_index < 0 or stream < 0 or stream > 3:
        raise DomainError("sample_index must be >= 0 and stream in 0..3")
    key = ((sample_index << 2) | stream) & _MASK64
    return _splitmix64((global_seed & _MASK64) ^ _splitmix64(key))


_CATEGORY_ORDER: tuple[StrengthCategory, ...] = ("weak", "medium", "strong")


def _strata(lo: float, hi: float) -> list[tuple[float, float]]:
    bands = [
        (lo, min(hi, WEAK_MEDIUM_BOUNDARY)),
        (max(lo, WEAK_MEDIUM_BOUNDARY), min(hi, MEDIUM_STRONG_BOUNDARY)),
        (max(lo, MEDIUM_STRONG_BOUNDARY), hi),
    ]
    return [(a, b) for a, b in bands if b > a]


def sample_params(config: OpticalConfig, sample_index: int) -> tuple[float, int]:
    """Draw (d_over_r0, per-sample seed) for one sample index.

    The parameter draw and the degradation stream use distinct mixed
    seeds so neither can alias the other.
    """
    params_rng = np.random.Generator(
        np.random.PCG64(mix_seed(config.seed, sample_index, stream=0))
    )
    lo, hi = config.d_over_r0_range
    if hi <= lo:
        value = float(lo)
    elif config.sampling == "stratified":
        bands = _strata(lo, hi)
        if not bands:
            value = float(lo)
        else:
            band = bands[sample_index % len(bands)]
            value = float(params_rng.uniform(*band))
    else:
        value = float(params_rng.uniform(lo, hi))
    return value, mix_seed(config.seed, sample_index, stream=1)


def synthesize_sample(
    scene: CleanScene, config: OpticalConfig, sample_index: int
) -> DegradedSample:
    """Parameter draw plus degradation for one (scene, index) pair."""
    d_over_r0, seed = sample_params(config, sample_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    sample_id = f"{sample_index:06d}_{scene.identifier}"
    return degrade_scene(
        scene, config, rng, d_over_r0=d_over_r0, seed=seed, sample_id=sample_id
    )


# ---------------------------------------------------------------------------
# scene sources
# ---------------------------------------------------------------------------

@dataclass
class ScenePair:
    """Paths to a clean image and its depth map, loaded lazily by workers."""

    clean_path: str
    depth_path: str
    source_id: str


def load_scene(pair: ScenePair) -> CleanScene:
    image = formats.read_image(pair.clean_path)
    if image.ndim != 3:
        raise ImageFormatError(f"{pair.clean_path}: clean image must be RGB")
    depth = formats.read_image(pair.depth_path)
    if depth.ndim == 3:
        if np.ptp(depth, axis=2).max() > 0:
            raise ImageFormatError(
                f"{pair.depth_path}: depth must be grayscale (channels differ)"
            )
        depth = depth[..., 0]
    return CleanScene(image, depth, pair.source_id)


def _resolve_scene(source) -> CleanScene:
    if isinstance(source, CleanScene):
        return source
    if isinstance(source, ScenePair):
        return load_scene(source)
    raise InvalidInputError(f"unsupported scene source {type(source)!r}")


def _generate_one(args) -> tuple[int, dict | None, str | None]:
    """Worker body: returns (index, metadata-or-None, skip-reason-or-None)."""
    index, source, config, out_root, debug = args
    try:
        scene = _resolve_scene(source)
    except Exception as exc:  # unreadable scene: skip, do not abort the run
        return index, None, f"{getattr(source, 'source_id', source)}: {exc}"
    sample = synthesize_sample(scene, config, index)
    sample_dir = Path(out_root) / sample.metadata["sample_id"]
    meta = formats.write_sample(
        sample_dir, sample, engine_version=ENGINE_VERSION, debug=debug
    )
    return index, meta, None


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        moment = datetime.now(tz=timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def generate_dataset(
    config: OpticalConfig,
    scenes: Iterable[CleanScene | ScenePair],
    out_dir,
    *,
    count: int | None = None,
    workers: int = 1,
    strict: bool = False,
) -> dict:
    """Generate a dataset tree and write its manifest.

    Scenes are assigned round-robin to sample indices. Output bytes are
    independent of ``workers``. Returns the manifest dictionary; skipped
    scenes are recorded in it and also raise if ``strict``.
    """
    scenes = list(scenes)
    if not scenes:
        raise InvalidInputError("at least one scene is required")
    count = config.sample_count if count is None else int(count)
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)

    tasks = [
        (index, scenes[index % len(scenes)], config, str(out_root), config.debug_outputs)
        for index in range(count)
    ]
    if workers <= 1:
        results = [_generate_one(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_generate_one, tasks, chunksize=1))

    metas: list[dict] = []
    skipped: list[str] = []
    for _, meta, skip in sorted(results, key=lambda r: r[0]):
        if skip is not None:
            log.warning("skipped sample: %s", skip)
            skipped.append(skip)
        else:
            metas.append(meta)
    if strict and skipped:
        raise DatasetError(f"{len(skipped)} scene(s) unreadable: {skipped[0]}")

    category_counts = {name: 0 for name in _CATEGORY_ORDER}
    for meta in metas:
        category_counts[meta["category"]] += 1

    manifest = {
        "engine_version": ENGINE_VERSION,
        "format_versions": formats.FORMAT_VERSIONS,
        "created_at": _timestamp(),
        "config": config_to_dict(config),
        "policies": {
            "boundary_convolution": "reflect",
            "boundary_sampling": "clamp",
            "flow_inversion": "bilinear-weighted-average-splat",
            "coverage_epsilon": COVERAGE_EPSILON,
            "d_over_r0_distribution": config.sampling,
        },
        "sample_count": len(metas),
        "category_counts": category_counts,
        "samples": [
            {
                "sample_id": meta["sample_id"],
                "d_over_r0": meta["d_over_r0"],
                "category": meta["category"],
                "seed": meta["seed"],
            }
            for meta in metas
        ],
        "skipped": skipped,
    }
    formats.write_json(out_root / formats.MANIFEST_FILENAME, manifest)
    return manifest


# ---------------------------------------------------------------------------
# dataset validation
# ---------------------------------------------------------------------------

def validate_dataset(root, *, flow_checks: int = 4, residual_limit: float = 0.1) -> dict:
    """Re-derive and verify the invariants a dataset promises.

    Checks manifest/sample cross-completeness, digests, category
    consistency, and (when forward fields were persisted) the fixed-point
    residual of the flow inversion on up to ``flow_checks`` samples.
    """
    root = Path(root)
    problems: list[str] = []
    manifest_path = root / formats.MANIFEST_FILENAME
    if not manifest_path.exists():
        raise DatasetError(f"{root}: missing {formats.MANIFEST_FILENAME}")
    manifest = formats.read_json(manifest_path)

    listed = {entry["sample_id"] for entry in manifest.get("samples", [])}
    on_disk = {p.name for p in root.iterdir() if p.is_dir()}
    for missing in sorted(listed - on_disk):
        problems.append(f"listed sample missing on disk: {missing}")
    for unlisted in sorted(on_disk - listed):
        problems.append(f"sample directory not in manifest: {unlisted}")

    residuals_checked = 0
    for entry in manifest.get("samples", []):
        sample_dir = root / entry["sample_id"]
        if not sample_dir.is_dir():
            continue
        for name in formats.SAMPLE_FILES + (formats.META_FILENAME,):
            if not (sample_dir / name).exists():
                problems.append(f"{entry['sample_id']}: missing {name}")
        meta_path = sample_dir / formats.META_FILENAME
        if not meta_path.exists():
            continue
        meta = formats.read_json(meta_path)
        expected_cat = categorize_strength(meta["d_over_r0"])
        if meta["category"] != expected_cat:
            problems.append(
                f"{entry['sample_id']}: category {meta['category']!r} inconsistent "
                f"with d_over_r0 {meta['d_over_r0']:g} ({expected_cat!r})"
            )
        if all((sample_dir / name).exists() for name in formats.SAMPLE_FILES):
            digest = formats.content_digest(sample_dir)
            if digest != meta.get("content_digest"):
                problems.append(
                    f"{entry['sample_id']}: content digest mismatch "
                    f"(files {digest[:12]}..., meta {str(meta.get('content_digest'))[:12]}...)"
                )
        forward_path = sample_dir / "flow_fwd.d2fl"
        if forward_path.exists() and residuals_checked < flow_checks:
            from .flowinv import BackwardFlow, composition_residual

            forward = formats.read_flow(forward_path).astype(np.float64)
            backward = formats.read_flow(sample_dir / "flow_bwd.d2fl").astype(np.float64)
            residual = composition_residual(
                forward, BackwardFlow(backward, np.ones(backward.shape[:2], bool))
            )
            margin = 4  # border pixels mix splat holes with sampling clamp
            interior = residual[margin:-margin, margin:-margin]
            median = float(np.median(interior if interior.size else residual))
            residuals_checked += 1
            if median > residual_limit:
                problems.append(
                    f"{entry['sample_id']}: flow fixed-point residual median "
                    f"{median:.3g} px exceeds {residual_limit} px"
                )

    return {
        "ok": not problems,
        "problems": problems,
        "samples_listed": len(listed),
        "flow_residuals_checked": residuals_checked,
    }


# ---------------------------------------------------------------------------
# verification metrics
# ---------------------------------------------------------------------------

def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf when equal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


_LUMA = np.array([0.299, 0.587, 0.114])


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    g = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    window = np.outer(g, g)
    return window / window.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    k1: float = 0.01,
    k2: float = 0.03,
    window_size: int = 11,
    sigma: float = 1.5,
) -> float:
    """Mean structural similarity with the standard Gaussian window.

    RGB inputs are converted to luma; dynamic range is fixed at 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a = a @ _LUMA
        b = b @ _LUMA
    if min(a.shape) < window_size:
        raise DomainError(f"image smaller than the {window_size}x{window_size} window")
    window = _gaussian_window(window_size, sigma)
    c1 = k1 * k1
    c2 = k2 * k2
    mean = lambda img: fftconvolve(img, window, mode="valid")
    mu_a = mean(a)
    mu_b = mean(b)
    var_a = mean(a * a) - mu_a * mu_a
    var_b = mean(b * b) - mu_b * mu_b
    cov = mean(a * b) - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())
