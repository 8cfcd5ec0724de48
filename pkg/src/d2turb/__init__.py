"""Depth-aware atmospheric turbulence degradation engine.

Converts clean images plus relative depth maps into physically consistent
turbulence-degraded training tuples: the degraded image, a tilt-only
intermediate, the clean ground truth, a backward supervision flow, and a
strength metadata record.
"""

from .config import (
    DEFAULT_SEED,
    OpticalConfig,
    PathGeometry,
    TiltSettings,
    ZernikeSettings,
    parse_config,
    serialize_config,
)
from .degrade import (
    CleanScene,
    DegradedSample,
    backward_warp,
    compute_modulation,
    degrade_scene,
    spatially_varying_blur,
    varying_convolve,
)
from .depth import fried_at_distance, modulation_map, project_depth, resolve_z_max
from .estimator import TurbulenceDegrader
from .fields import (
    TiltSpectrumParams,
    modulate_displacement,
    synthesize_raw_field,
    tilt_rms_for_strength,
)
from .flowinv import BackwardFlow, composition_residual, fill_holes, forward_splat_invert
from .formats import read_flow, read_image, write_flow, write_image
from .pipeline import (
    ScenePair,
    categorize_strength,
    generate_dataset,
    mix_seed,
    psnr,
    sample_params,
    ssim,
    synthesize_sample,
    validate_dataset,
)
from .version import ENGINE_VERSION
from .zernike import (
    AberrationSample,
    Psf,
    PsfGrid,
    ZernikeBasis,
    build_basis,
    build_psf_grid,
    noll_covariance,
    noll_to_nm,
    sample_coefficients,
    synthesize_psf,
    tilt_variance,
)

__version__ = ENGINE_VERSION

__all__ = [
    "AberrationSample",
    "BackwardFlow",
    "CleanScene",
    "DEFAULT_SEED",
    "DegradedSample",
    "ENGINE_VERSION",
    "OpticalConfig",
    "PathGeometry",
    "Psf",
    "PsfGrid",
    "ScenePair",
    "TiltSettings",
    "TiltSpectrumParams",
    "TurbulenceDegrader",
    "ZernikeBasis",
    "ZernikeSettings",
    "backward_warp",
    "build_basis",
    "build_psf_grid",
    "categorize_strength",
    "composition_residual",
    "compute_modulation",
    "degrade_scene",
    "fill_holes",
    "forward_splat_invert",
    "fried_at_distance",
    "generate_dataset",
    "mix_seed",
    "modulate_displacement",
    "modulation_map",
    "noll_covariance",
    "noll_to_nm",
    "parse_config",
    "project_depth",
    "psnr",
    "read_flow",
    "read_image",
    "resolve_z_max",
    "sample_coefficients",
    "sample_params",
    "serialize_config",
    "spatially_varying_blur",
    "ssim",
    "synthesize_psf",
    "synthesize_raw_field",
    "synthesize_sample",
    "tilt_rms_for_strength",
    "tilt_variance",
    "validate_dataset",
    "varying_convolve",
    "write_flow",
    "write_image",
]
