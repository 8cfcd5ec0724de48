"""Regenerate the committed golden datasets with the primary engine.

Run from this directory with the `d2turb` package installed:

    SOURCE_DATE_EPOCH=0 python generate_golden.py

`mixed27/` is a 27-sample stratified dataset spanning all three strength
categories at 32x32; `zero1/` holds one turbulence-free sample whose
degraded outputs equal the clean image. Committed so loader tests run
without building the generator.
"""

import os
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from d2turb import CleanScene, OpticalConfig, TiltSettings, ZernikeSettings, generate_dataset

HERE = Path(__file__).parent


def scenes(count=3, size=32):
    out = []
    for i in range(count):
        rng = np.random.default_rng(7000 + i)
        img = gaussian_filter(rng.random((size, size, 3)), (2.5, 2.5, 0))
        img = 0.05 + 0.9 * (img - img.min()) / (img.max() - img.min())
        depth = np.tile(np.linspace(0.0, 1.0, size), (size, 1))
        out.append(CleanScene(img, depth, f"g{i}"))
    return out


def main():
    os.environ.setdefault("SOURCE_DATE_EPOCH", "0")
    small = ZernikeSettings(modes=10, pupil_resolution=48, kernel_size=9, grid_shape=(2, 2))

    mixed = OpticalConfig(
        zernike=small,
        tilt=TiltSettings(correlation_px=16.0, pixels_per_tilt=1.0),
        d_over_r0_range=(0.5, 5.5),
        sampling="stratified",
        sample_count=27,
        seed=20240815,
    )
    manifest = generate_dataset(mixed, scenes(), HERE / "mixed27")
    print("mixed27:", manifest["category_counts"])

    zero = OpticalConfig(
        zernike=small,
        tilt=TiltSettings(correlation_px=16.0, rms_px=0.0),
        d_over_r0_range=(0.0, 0.0),
        sample_count=1,
        seed=20240815,
    )
    manifest = generate_dataset(zero, scenes(1), HERE / "zero1")
    print("zero1:", manifest["sample_count"])


if __name__ == "__main__":
    main()
