"""Engine configuration: dataclasses, TOML parsing, and serialization.

A configuration file is TOML with four optional tables. Every key has a
desk-scale default, so the empty file is a valid configuration. Unknown
keys are rejected by name: silently ignoring a typo like ``kernal_size``
would produce a dataset that quietly ignores the user's intent.

The resolved configuration (defaults applied, derived values pinned) is
echoed into every dataset manifest so datasets are self-describing.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError, UnknownKeyError

# Fixed fallback seed: runs without an explicit seed are still reproducible.
DEFAULT_SEED = 0x0D2_7EDB


@dataclass
class PathGeometry:
    """Optical path geometry for the depth-to-distance projection."""

    path_length: float = 1000.0  # L, meters
    baseline_offset: float = 0.9  # s, dimensionless, in (0, 1)
    z_max: float | None = None  # meters; None resolves to path_length
    z_max_policy: str = "path-length"  # or "per-image"

    def __post_init__(self):
        if not self.path_length > 0.0:
            raise ConfigError("must be > 0", "geometry.path_length_m")
        if not 0.0 < self.baseline_offset < 1.0:
            raise ConfigError("must lie in the open interval (0, 1)", "geometry.baseline_offset")
        if self.z_max is not None and self.z_max < self.path_length * self.baseline_offset:
            raise ConfigError(
                "must be >= path_length_m * baseline_offset", "geometry.z_max_m"
            )
        if self.z_max_policy not in ("path-length", "per-image"):
            raise ConfigError(
                "must be 'path-length' or 'per-image'", "geometry.z_max_policy"
            )


@dataclass
class ZernikeSettings:
    """Aberration basis and PSF grid parameters."""

    modes: int = 36  # Noll modes 1..J
    pupil_resolution: int = 256  # pupil grid side length
    kernel_size: int = 33  # odd crop size of emitted blur kernels, px
    grid_shape: tuple[int, int] = (8, 8)  # PSF anchors (rows, cols)
    oversample: int = 2  # focal-plane sampling factor
    anchor_correlation: float = 1.0  # aberration correlation length, anchor units

    def __post_init__(self):
        self.grid_shape = tuple(self.grid_shape)
        if self.modes < 3:
            raise ConfigError("must be >= 3", "zernike.modes")
        if self.pupil_resolution < 32:
            raise ConfigError("must be >= 32", "zernike.pupil_resolution")
        if self.kernel_size < 3 or self.kernel_size % 2 == 0:
            raise ConfigError("must be odd and >= 3", "zernike.kernel_size")
        if len(self.grid_shape) != 2 or min(self.grid_shape) < 2:
            raise ConfigError("must be two integers >= 2", "zernike.grid")
        if self.oversample < 1:
            raise ConfigError("must be >= 1", "zernike.oversample")
        if self.kernel_size > self.pupil_resolution * self.oversample:
            raise ConfigError(
                "must fit inside pupil_resolution * oversample", "zernike.kernel_size"
            )
        if not (self.anchor_correlation >= 0.0):
            raise ConfigError("must be >= 0 (inf allowed)", "zernike.anchor_correlation")


@dataclass
class TiltSettings:
    """Displacement-field spectrum parameters.

    ``rms_px`` pins the per-axis RMS displacement directly. When left
    unset, the RMS is derived from the turbulence strength via the tilt
    variance of the Kolmogorov covariance, scaled by ``pixels_per_tilt``
    (the plate-scale constant converting one radian-unit of wavefront tilt
    into pixels). ``inner_scale_px`` is the aperture-smoothing scale that
    band-limits the displacement spectrum.
    """

    correlation_px: float = 96.0
    rms_px: float | None = None
    pixels_per_tilt: float = 1.0
    spectral_exponent: float = -11.0 / 3.0
    inner_scale_px: float = 1.5
    field_mode: str = "independent"  # or "phase-gradient"

    def __post_init__(self):
        if not self.correlation_px > 0.0:
            raise ConfigError("must be > 0", "tilt.correlation_px")
        if self.rms_px is not None and self.rms_px < 0.0:
            raise ConfigError("must be >= 0", "tilt.rms_px")
        if self.pixels_per_tilt < 0.0:
            raise ConfigError("must be >= 0", "tilt.pixels_per_tilt")
        if self.spectral_exponent >= 0.0:
            raise ConfigError("must be negative", "tilt.spectral_exponent")
        if self.inner_scale_px < 0.0:
            raise ConfigError("must be >= 0", "tilt.inner_scale_px")
        if self.field_mode not in ("independent", "phase-gradient"):
            raise ConfigError(
                "must be 'independent' or 'phase-gradient'", "tilt.field_mode"
            )


@dataclass
class OpticalConfig:
    """Full resolved engine configuration."""

    geometry: PathGeometry = field(default_factory=PathGeometry)
    d_over_r0_range: tuple[float, float] = (1.0, 5.0)
    zernike: ZernikeSettings = field(default_factory=ZernikeSettings)
    tilt: TiltSettings = field(default_factory=TiltSettings)
    flat_field_mode: bool = False
    persist_blur: bool = False
    debug_outputs: bool = False
    sampling: str = "uniform"  # or "stratified"
    sample_count: int = 64
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        self.d_over_r0_range = tuple(self.d_over_r0_range)
        lo, hi = self.d_over_r0_range
        if not (0.0 <= lo <= hi):
            raise ConfigError("must satisfy 0 <= lo <= hi", "turbulence.d_over_r0")
        if self.sampling not in ("uniform", "stratified"):
            raise ConfigError("must be 'uniform' or 'stratified'", "sampling")
        if self.sample_count < 1:
            raise ConfigError("must be >= 1", "sample_count")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        self.seed = int(self.seed)


# ---------------------------------------------------------------------------
# TOML schema
# ---------------------------------------------------------------------------

_SCHEMA = {
    "seed": int,
    "sample_count": int,
    "sampling": str,
    "flat_field_mode": bool,
    "persist_blur": bool,
    "debug_outputs": bool,
    "geometry": {
        "path_length_m": float,
        "baseline_offset": float,
        "z_max_m": float,
        "z_max_policy": str,
    },
    "turbulence": {
        "d_over_r0": list,
    },
    "zernike": {
        "modes": int,
        "pupil_resolution": int,
        "kernel_size": int,
        "grid": list,
        "oversample": int,
        "anchor_correlation": float,
    },
    "tilt": {
        "correlation_px": float,
        "rms_px": float,
        "pixels_per_tilt": float,
        "spectral_exponent": float,
        "inner_scale_px": float,
        "field_mode": str,
    },
}


def _check_keys(data: dict, schema: dict, prefix: str = "") -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise UnknownKeyError("unknown configuration key", path)
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError("expected a table", path)
            _check_keys(value, expected, path + ".")
        elif expected is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError("expected a number", path)
        elif expected is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError("expected an integer", path)
        elif not isinstance(value, expected):
            raise ConfigError(f"expected {expected.__name__}", path)


def _num_pair(value, path: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError("expected a pair of numbers [lo, hi]", path)
    return float(value[0]), float(value[1])


def config_from_dict(data: dict) -> OpticalConfig:
    """Build a validated OpticalConfig from a parsed TOML dictionary."""
    _check_keys(data, _SCHEMA)
    geo = data.get("geometry", {})
    turb = data.get("turbulence", {})
    zern = data.get("zernike", {})
    tilt = data.get("tilt", {})

    geometry = PathGeometry(
        path_length=float(geo.get("path_length_m", 1000.0)),
        baseline_offset=float(geo.get("baseline_offset", 0.9)),
        z_max=(float(geo["z_max_m"]) if "z_max_m" in geo else None),
        z_max_policy=geo.get("z_max_policy", "path-length"),
    )
    zsettings = ZernikeSettings(
        modes=zern.get("modes", 36),
        pupil_resolution=zern.get("pupil_resolution", 256),
        kernel_size=zern.get("kernel_size", 33),
        grid_shape=tuple(int(v) for v in zern.get("grid", (8, 8))),
        oversample=zern.get("oversample", 2),
        anchor_correlation=float(zern.get("anchor_correlation", 1.0)),
    )
    tsettings = TiltSettings(
        correlation_px=float(tilt.get("correlation_px", 96.0)),
        rms_px=(float(tilt["rms_px"]) if "rms_px" in tilt else None),
        pixels_per_tilt=float(tilt.get("pixels_per_tilt", 1.0)),
        spectral_exponent=float(tilt.get("spectral_exponent", -11.0 / 3.0)),
        inner_scale_px=float(tilt.get("inner_scale_px", 1.5)),
        field_mode=tilt.get("field_mode", "independent"),
    )
    rng_range = _num_pair(turb.get("d_over_r0", [1.0, 5.0]), "turbulence.d_over_r0")
    return OpticalConfig(
        geometry=geometry,
        d_over_r0_range=rng_range,
        zernike=zsettings,
        tilt=tsettings,
        flat_field_mode=bool(data.get("flat_field_mode", False)),
        persist_blur=bool(data.get("persist_blur", False)),
        debug_outputs=bool(data.get("debug_outputs", False)),
        sampling=data.get("sampling", "uniform"),
        sample_count=int(data.get("sample_count", 64)),
        seed=int(data.get("seed", DEFAULT_SEED)),
    )


def parse_config(path) -> OpticalConfig:
    """Parse and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error in {path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: OpticalConfig) -> dict:
    """Resolved configuration as the nested dict echoed into manifests."""
    geom = cfg.geometry
    return {
        "seed": cfg.seed,
        "sample_count": cfg.sample_count,
        "sampling": cfg.sampling,
        "flat_field_mode": cfg.flat_field_mode,
        "persist_blur": cfg.persist_blur,
        "debug_outputs": cfg.debug_outputs,
        "geometry": {
            "path_length_m": geom.path_length,
            "baseline_offset": geom.baseline_offset,
            "z_max_m": geom.z_max if geom.z_max is not None else geom.path_length,
            "z_max_policy": geom.z_max_policy,
        },
        "turbulence": {"d_over_r0": list(cfg.d_over_r0_range)},
        "zernike": {
            "modes": cfg.zernike.modes,
            "pupil_resolution": cfg.zernike.pupil_resolution,
            "kernel_size": cfg.zernike.kernel_size,
            "grid": list(cfg.zernike.grid_shape),
            "oversample": cfg.zernike.oversample,
            "anchor_correlation": cfg.zernike.anchor_correlation,
        },
        "tilt": {
            "correlation_px": cfg.tilt.correlation_px,
            **({"rms_px": cfg.tilt.rms_px} if cfg.tilt.rms_px is not None else {}),
            "pixels_per_tilt": cfg.tilt.pixels_per_tilt,
            "spectral_exponent": cfg.tilt.spectral_exponent,
            "inner_scale_px": cfg.tilt.inner_scale_px,
            "field_mode": cfg.tilt.field_mode,
        },
    }


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        text = repr(value)
        # TOML floats need a decimal point or exponent marker
        return text if ("." in text or "e" in text or "E" in text) else text + ".0"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value)!r} to TOML")


def serialize_config(cfg: OpticalConfig) -> str:
    """Render the resolved configuration as TOML.

    Round trips exactly: ``config_from_dict`` of the parsed output equals
    the input configuration (floats serialized with full precision).
    """
    data = config_to_dict(cfg)
    lines = []
    for key, value in data.items():
        if not isinstance(value, dict):
            lines.append(f"{key} = {_toml_value(value)}")
    for section, table in data.items():
        if isinstance(table, dict):
            lines.append("")
            lines.append(f"[{section}]")
            for key, value in table.items():
                lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def write_config(cfg: OpticalConfig, path) -> None:
    Path(path).write_text(serialize_config(cfg), encoding="utf-8")


def replace(cfg: OpticalConfig, **kwargs) -> OpticalConfig:
    """dataclasses.replace that revalidates nested settings."""
    return dataclasses.replace(cfg, **kwargs)
