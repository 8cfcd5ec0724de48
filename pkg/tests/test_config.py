"""Configuration parsing, validation, defaults, and round trips."""

import pytest

from d2turb import OpticalConfig, PathGeometry, TiltSettings, ZernikeSettings, parse_config, serialize_config
from d2turb.config import DEFAULT_SEED, config_from_dict, config_to_dict
from d2turb.errors import ConfigError, UnknownKeyError


class TestDefaults:
    def test_empty_file_is_fully_defaulted(self, tmp_path):
        path = tmp_path / "empty.toml"
        path.write_text("")
        config = parse_config(path)
        assert config == OpticalConfig()
        assert config.sample_count == 64
        assert config.seed == DEFAULT_SEED
        assert config.geometry.path_length == 1000.0
        assert config.zernike.grid_shape == (8, 8)

    def test_partial_file_keeps_other_defaults(self, tmp_path):
        path = tmp_path / "partial.toml"
        path.write_text("[geometry]\npath_length_m = 500.0\n")
        config = parse_config(path)
        assert config.geometry.path_length == 500.0
        assert config.geometry.baseline_offset == 0.9


class TestValidation:
    def test_baseline_offset_out_of_range_names_field(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[geometry]\nbaseline_offset = 1.5\n")
        with pytest.raises(ConfigError, match=r"geometry\.baseline_offset"):
            parse_config(path)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "unknown.toml"
        path.write_text("[zernike]\nkernal_size = 31\n")
        with pytest.raises(UnknownKeyError, match=r"zernike\.kernal_size"):
            parse_config(path)

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "top.toml"
        path.write_text("speed = 9\n")
        with pytest.raises(UnknownKeyError, match="speed"):
            parse_config(path)

    def test_syntax_error_reports_location(self, tmp_path):
        path = tmp_path / "syntax.toml"
        path.write_text("seed = = 3\n")
        with pytest.raises(ConfigError, match="syntax"):
            parse_config(path)

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError, match=r"zernike\.kernel_size"):
            ZernikeSettings(kernel_size=32)

    def test_zmax_below_baseline_rejected(self):
        with pytest.raises(ConfigError, match=r"geometry\.z_max_m"):
            PathGeometry(path_length=1000.0, baseline_offset=0.9, z_max=800.0)

    def test_negative_range_rejected(self):
        with pytest.raises(ConfigError, match="d_over_r0"):
            OpticalConfig(d_over_r0_range=(-1.0, 2.0))

    def test_inverted_range_rejected(self):
        with pytest.raises(ConfigError):
            OpticalConfig(d_over_r0_range=(3.0, 2.0))

    def test_wrong_type_reports_field(self, tmp_path):
        path = tmp_path / "type.toml"
        path.write_text('[zernike]\nmodes = "many"\n')
        with pytest.raises(ConfigError, match=r"zernike\.modes"):
            parse_config(path)


class TestRoundTrip:
    def test_serialize_parse_round_trip(self, tmp_path):
        config = OpticalConfig(
            geometry=PathGeometry(path_length=1234.5, baseline_offset=0.37, z_max=1300.0),
            d_over_r0_range=(0.5, 4.25),
            zernike=ZernikeSettings(modes=21, pupil_resolution=128, kernel_size=17,
                                    grid_shape=(4, 6), oversample=2, anchor_correlation=2.5),
            tilt=TiltSettings(correlation_px=48.0, rms_px=1.875, pixels_per_tilt=0.8),
            flat_field_mode=True,
            sampling="stratified",
            sample_count=12,
            seed=987654321,
        )
        path = tmp_path / "cfg.toml"
        path.write_text(serialize_config(config))
        parsed = parse_config(path)
        # z_max resolves to an explicit value on serialization
        assert parsed.geometry.z_max == 1300.0
        assert parsed == config

    def test_random_config_round_trips(self, tmp_path):
        import numpy as np

        rng = np.random.default_rng(0)
        for trial in range(10):
            config = OpticalConfig(
                geometry=PathGeometry(
                    path_length=float(rng.uniform(10, 5000)),
                    baseline_offset=float(rng.uniform(0.01, 0.99)),
                ),
                d_over_r0_range=tuple(np.sort(rng.uniform(0, 8, 2)).tolist()),
                tilt=TiltSettings(correlation_px=float(rng.uniform(1, 200)),
                                  rms_px=float(rng.uniform(0, 5))),
                seed=int(rng.integers(0, 2**63)),
            )
            path = tmp_path / f"cfg{trial}.toml"
            path.write_text(serialize_config(config))
            parsed = parse_config(path)
            resolved = config_from_dict(config_to_dict(config))
            assert parsed == resolved

    def test_dict_round_trip_is_idempotent(self):
        # the first pass pins z_max to its resolved value; after that the
        # dict form round-trips exactly
        resolved = config_from_dict(config_to_dict(OpticalConfig()))
        assert config_from_dict(config_to_dict(resolved)) == resolved
