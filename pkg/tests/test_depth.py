"""Depth projection, Fried scaling, and modulation-map behavior."""

import math

import numpy as np
import pytest

from d2turb import PathGeometry, fried_at_distance, modulation_map, project_depth, resolve_z_max
from d2turb.depth import normalize_depth_image
from d2turb.errors import DomainError, InvalidInputError, NormalizationError


def geom(path_length=1000.0, s=0.9, **kw):
    return PathGeometry(path_length=path_length, baseline_offset=s, **kw)


class TestProjectDepth:
    def test_far_plane_maps_to_path_length(self):
        z = project_depth(np.ones((4, 4)), geom())
        assert np.all(z == 1000.0)

    def test_near_plane_maps_to_baseline(self):
        z = project_depth(np.zeros((4, 4)), geom())
        assert np.allclose(z, 900.0, rtol=0, atol=0)

    def test_midpoint(self):
        # oracle: 800 * (0.75 * 0.5 + 0.25) = 500 exactly
        z = project_depth(np.full((2, 2), 0.5), geom(800.0, 0.25))
        assert np.all(z == 500.0)

    def test_range_invariant(self):
        rng = np.random.default_rng(1)
        z = project_depth(rng.random((32, 32)), geom())
        assert z.min() >= 900.0 and z.max() <= 1000.0

    def test_rejects_out_of_range_depth(self):
        with pytest.raises(InvalidInputError):
            project_depth(np.full((4, 4), 1.5), geom())

    def test_rejects_nan(self):
        bad = np.ones((4, 4))
        bad[0, 0] = np.nan
        with pytest.raises(InvalidInputError):
            project_depth(bad, geom())


class TestFriedAtDistance:
    def test_identity_at_full_path(self):
        assert fried_at_distance(1000.0, 0.05, 1000.0) == 0.05

    def test_half_path(self):
        # frozen from the mpmath oracle: 0.05 * 2**(3/5)
        assert fried_at_distance(500.0, 0.05, 1000.0) == pytest.approx(
            0.075785828325519904, rel=1e-12
        )

    def test_eighth_path(self):
        # frozen from the mpmath oracle: 0.04 * 8**(3/5)
        assert fried_at_distance(125.0, 0.04, 1000.0) == pytest.approx(
            0.13928809012737986, rel=1e-12
        )

    def test_strictly_decreasing(self):
        z = np.linspace(10.0, 1000.0, 200)
        r0 = fried_at_distance(z, 0.05, 1000.0)
        assert np.all(np.diff(r0) < 0)

    def test_power_law_consistency(self):
        # r0(z)^(-5/3) proportional to z over a log-spaced grid
        z = np.logspace(0, 3, 40)
        r0 = fried_at_distance(z, 0.07, 1000.0)
        ratio = r0 ** (-5.0 / 3.0) / z
        assert np.abs(ratio / ratio[0] - 1.0).max() < 1e-9

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            fried_at_distance(0.0, 0.05, 1000.0)
        with pytest.raises(DomainError):
            fried_at_distance(-5.0, 0.05, 1000.0)
        with pytest.raises(DomainError):
            fried_at_distance(100.0, -0.1, 1000.0)


class TestModulationMap:
    def test_flat_field_reduction_is_exact(self):
        m = modulation_map(np.full((8, 8), 750.0), 750.0)
        assert np.all(m == 1.0)

    def test_half_distance(self):
        # frozen from the mpmath oracle: 0.5**(3/5)
        m = modulation_map(np.full((2, 2), 500.0), 1000.0)
        assert m[0, 0] == pytest.approx(0.6597539553864471, rel=1e-12)

    def test_nine_tenths_distance(self):
        # frozen from the mpmath oracle: 0.9**(3/5)
        m = modulation_map(np.full((2, 2), 900.0), 1000.0)
        assert m[0, 0] == pytest.approx(0.9387403933595694, rel=1e-12)

    def test_rejects_distance_beyond_zmax(self):
        with pytest.raises(NormalizationError):
            modulation_map(np.full((2, 2), 1001.0), 1000.0)

    def test_monotone_in_distance(self):
        rng = np.random.default_rng(3)
        z = 100.0 + 900.0 * rng.random((16, 16))
        m = modulation_map(z, 1000.0)
        order = np.argsort(z.ravel())
        assert np.all(np.diff(m.ravel()[order]) >= 0)

    def test_composition_range(self):
        # projecting then normalizing by L lands in [s^(3/5), 1]
        rng = np.random.default_rng(4)
        for s in (0.1, 0.5, 0.9):
            g = geom(1000.0, s)
            z = project_depth(rng.random((16, 16)), g)
            m = modulation_map(z, 1000.0)
            assert m.min() >= s ** 0.6 - 1e-12
            assert m.max() <= 1.0


class TestDepthMonotonicity:
    def test_deeper_is_stronger(self):
        depth = np.sort(np.random.default_rng(5).random((1, 256)), axis=1)
        g = geom()
        m = modulation_map(project_depth(depth, g), 1000.0)
        assert np.all(np.diff(m[0]) >= 0)


class TestNormalizeDepthImage:
    def test_16bit_peak(self):
        out = normalize_depth_image(np.array([[65535, 0]], dtype=np.uint16), 65535)
        assert out[0, 0] == 1.0 and out[0, 1] == 0.0

    def test_clamps_and_warns(self, caplog):
        with caplog.at_level("WARNING", logger="d2turb"):
            out = normalize_depth_image(np.array([[1.5, -0.25, 0.5]]))
        assert out.tolist() == [[1.0, 0.0, 0.5]]
        assert any("clamping" in record.message for record in caplog.records)


class TestResolveZMax:
    def test_default_is_path_length(self):
        assert resolve_z_max(geom()) == 1000.0

    def test_explicit_override(self):
        assert resolve_z_max(geom(z_max=1200.0)) == 1200.0

    def test_per_image_policy(self):
        g = geom(z_max_policy="per-image")
        distances = np.array([[910.0, 955.0]])
        assert resolve_z_max(g, distances) == 955.0
        with pytest.raises(DomainError):
            resolve_z_max(g)
