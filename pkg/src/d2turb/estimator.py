"""Scikit-learn style front door for the degradation engine.

``TurbulenceDegrader`` is a stateless transformer: ``fit`` validates and
returns self, ``transform`` maps clean scenes to degraded sample tuples.
Every constructor argument is a plain parameter in the sklearn sense, so
``get_params`` / ``set_params`` / ``clone`` compose with pipeline and
search utilities out of the box.

Each input scene is degraded under a seed mixed from (seed, position), so
results do not depend on batch order or size.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .config import DEFAULT_SEED, OpticalConfig, PathGeometry, TiltSettings, ZernikeSettings
from .degrade import CleanScene, DegradedSample, degrade_scene
from .errors import InvalidInputError
from .pipeline import mix_seed


class TurbulenceDegrader(BaseEstimator, TransformerMixin):
    """Depth-aware turbulence degradation as a transformer.

    Parameters mirror the engine configuration; ``d_over_r0`` may be a
    single strength or a (lo, hi) range sampled per scene.
    """

    def __init__(
        self,
        d_over_r0=3.0,
        path_length: float = 1000.0,
        baseline_offset: float = 0.9,
        z_max: float | None = None,
        flat_field: bool = False,
        modes: int = 36,
        pupil_resolution: int = 256,
        kernel_size: int = 33,
        grid_shape: tuple[int, int] = (8, 8),
        oversample: int = 2,
        anchor_correlation: float = 1.0,
        tilt_correlation_px: float = 96.0,
        tilt_rms_px: float | None = None,
        tilt_inner_scale_px: float = 1.5,
        pixels_per_tilt: float = 1.0,
        seed: int = DEFAULT_SEED,
    ):
        self.d_over_r0 = d_over_r0
        self.path_length = path_length
        self.baseline_offset = baseline_offset
        self.z_max = z_max
        self.flat_field = flat_field
        self.modes = modes
        self.pupil_resolution = pupil_resolution
        self.kernel_size = kernel_size
        self.grid_shape = grid_shape
        self.oversample = oversample
        self.anchor_correlation = anchor_correlation
        self.tilt_correlation_px = tilt_correlation_px
        self.tilt_rms_px = tilt_rms_px
        self.tilt_inner_scale_px = tilt_inner_scale_px
        self.pixels_per_tilt = pixels_per_tilt
        self.seed = seed

    def _strength_range(self) -> tuple[float, float]:
        if np.isscalar(self.d_over_r0):
            value = float(self.d_over_r0)
            return value, value
        lo, hi = self.d_over_r0
        return float(lo), float(hi)

    def _config(self) -> OpticalConfig:
        return OpticalConfig(
            geometry=PathGeometry(
                path_length=self.path_length,
                baseline_offset=self.baseline_offset,
                z_max=self.z_max,
            ),
            d_over_r0_range=self._strength_range(),
            zernike=ZernikeSettings(
                modes=self.modes,
                pupil_resolution=self.pupil_resolution,
                kernel_size=self.kernel_size,
                grid_shape=tuple(self.grid_shape),
                oversample=self.oversample,
                anchor_correlation=self.anchor_correlation,
            ),
            tilt=TiltSettings(
                correlation_px=self.tilt_correlation_px,
                rms_px=self.tilt_rms_px,
                inner_scale_px=self.tilt_inner_scale_px,
                pixels_per_tilt=self.pixels_per_tilt,
            ),
            flat_field_mode=self.flat_field,
            seed=self.seed,
        )

    @staticmethod
    def _as_scene(item, position: int) -> CleanScene:
        if isinstance(item, CleanScene):
            return item
        if isinstance(item, (tuple, list)) and len(item) == 2:
            return CleanScene(np.asarray(item[0]), np.asarray(item[1]), f"scene{position:04d}")
        raise InvalidInputError(
            "scenes must be CleanScene instances or (image, depth) pairs"
        )

    def fit(self, X, y=None):
        """Validate parameters; the transformer learns nothing from data."""
        self._config()  # raises ConfigError on bad parameters
        self.n_features_in_ = 0
        return self

    def transform(self, X) -> list[DegradedSample]:
        """Degrade a sequence of scenes into training tuples."""
        config = self._config()
        lo, hi = config.d_over_r0_range
        out = []
        for position, item in enumerate(X):
            scene = self._as_scene(item, position)
            params_rng = np.random.Generator(
                np.random.PCG64(mix_seed(config.seed, position, stream=0))
            )
            strength = float(params_rng.uniform(lo, hi)) if hi > lo else lo
            seed = mix_seed(config.seed, position, stream=1)
            rng = np.random.Generator(np.random.PCG64(seed))
            out.append(
                degrade_scene(
                    scene, config, rng, d_over_r0=strength, seed=seed,
                    sample_id=f"{position:06d}_{scene.identifier}",
                )
            )
        return out
