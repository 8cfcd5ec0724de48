import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

sys.path.insert(0, str(Path(__file__).parent))  # for `oracles`

from d2turb import CleanScene, OpticalConfig, TiltSettings, ZernikeSettings


def make_smooth_image(height=64, width=64, seed=0, channels=3, blur=3.0):
    rng = np.random.default_rng(seed)
    shape = (height, width, channels) if channels else (height, width)
    sigma = (blur, blur, 0)[: len(shape)]
    img = gaussian_filter(rng.random(shape), sigma)
    lo, hi = img.min(), img.max()
    return 0.05 + 0.9 * (img - lo) / (hi - lo)


@pytest.fixture
def smooth_image():
    return make_smooth_image()


@pytest.fixture
def ramp_depth():
    return np.tile(np.linspace(0.0, 1.0, 64), (64, 1))


@pytest.fixture
def small_config():
    """Light configuration for fast end-to-end tests."""
    return OpticalConfig(
        zernike=ZernikeSettings(
            modes=15, pupil_resolution=64, kernel_size=11, grid_shape=(3, 3)
        ),
        tilt=TiltSettings(correlation_px=16.0, rms_px=1.5),
        d_over_r0_range=(1.0, 5.0),
        seed=1234,
    )


@pytest.fixture
def small_scene(smooth_image, ramp_depth):
    return CleanScene(smooth_image, ramp_depth, "fixture")
