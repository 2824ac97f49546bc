"""Grid, transforms, multipliers, norms, and field serialization."""

import io

import numpy as np
import pytest

from polyharmlab.grid import (
    Field,
    GridSpec,
    RepresentationError,
    apply_multiplier,
    boundary_decay,
    evaluate_symbol,
    field_from_function,
    forward_transform,
    inverse_transform,
    norm_lp,
    radial_symbol,
    read_field,
    sphere_area,
    unit_ball_volume,
    weight_abs_power,
    weight_bracket_power,
    weighted_l2_norm,
    write_field,
)

RNG = np.random.default_rng(42)


def random_field(grid):
    vals = RNG.standard_normal(grid.shape) + 1j * RNG.standard_normal(grid.shape)
    return Field(grid, vals)


class TestGridSpec:
    def test_spacings(self):
        g = GridSpec(3, 16, 4.0)
        assert g.h == pytest.approx(0.5)
        assert g.h_xi == pytest.approx(np.pi / 4.0)
        assert g.cell_volume == pytest.approx(0.125)
        assert g.nyquist_radius == pytest.approx(np.pi / 4.0 * 8)
        assert g.shape == (16, 16, 16)
        assert g.size == 16 ** 3

    def test_even_dimension_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(2, 16, 4.0)

    def test_odd_point_count_rejected(self):
        with pytest.raises(ValueError):
            GridSpec(3, 15, 4.0)

    def test_memory_budget_enforced(self):
        with pytest.raises(ValueError):
            GridSpec(3, 512, 4.0)  # 512^3 > 2^25
        GridSpec(3, 512, 4.0, max_points=2 ** 27)  # raised budget admits it

    def test_coords_cover_box(self):
        g = GridSpec(1, 8, 2.0)
        assert g.axis_coords()[0] == pytest.approx(-2.0)
        assert g.axis_coords()[-1] == pytest.approx(2.0 - g.h)

    def test_origin_cell_radius_volume(self):
        g = GridSpec(3, 16, 4.0)
        r0 = g.origin_cell_radius()
        assert unit_ball_volume(3) * r0 ** 3 == pytest.approx(g.cell_volume)

    def test_sphere_area(self):
        assert sphere_area(3, 2.0) == pytest.approx(4 * np.pi * 4.0)


class TestTransforms:
    @pytest.mark.parametrize("n,npts", [(1, 32), (3, 16)])
    def test_round_trip(self, n, npts):
        g = GridSpec(n, npts, 3.0)
        f = random_field(g)
        back = inverse_transform(forward_transform(f))
        np.testing.assert_allclose(back.values, f.values, atol=1e-12)

    def test_parseval(self):
        g = GridSpec(3, 16, 3.0)
        f = random_field(g)
        assert forward_transform(f).norm2() == pytest.approx(f.norm2(), rel=1e-12)

    def test_gaussian_transform_matches_continuum(self):
        # e^{-x^2/2} is its own unitary Fourier transform
        g = GridSpec(1, 128, 12.0)
        f = field_from_function(g, lambda x: np.exp(-x[0] ** 2 / 2.0))
        fhat = forward_transform(f)
        xi = np.sort(g.axis_freqs())
        expect = np.exp(-xi ** 2 / 2.0)
        got = np.real(fhat.values[np.argsort(g.axis_freqs())])
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_representation_guard(self):
        g = GridSpec(1, 8, 1.0)
        f = random_field(g)
        with pytest.raises(RepresentationError):
            inverse_transform(f)
        with pytest.raises(RepresentationError):
            forward_transform(forward_transform(f))

    def test_plane_wave_is_delta(self):
        g = GridSpec(1, 16, np.pi)
        k = 3
        f = field_from_function(g, lambda x: np.exp(1j * k * x[0]))
        fhat = forward_transform(f)
        mags = np.abs(fhat.values)
        peak = np.argmax(mags)
        assert g.axis_freqs()[peak] == pytest.approx(float(k))
        mags_rest = np.delete(mags, peak)
        assert mags_rest.max() < 1e-12 * mags[peak]


class TestSymbols:
    def test_negative_order_zero_mode_rule(self):
        g = GridSpec(3, 8, 2.0)
        sym = evaluate_symbol(g, radial_symbol(lambda r: 1.0 / r ** 2))
        assert sym[(0, 0, 0)] == 0.0
        assert np.all(np.isfinite(sym))

    def test_explicit_zero_mode(self):
        g = GridSpec(3, 8, 2.0)
        sym = evaluate_symbol(g, radial_symbol(lambda r: 1.0 / r ** 2), zero_mode=7.0)
        assert sym[(0, 0, 0)] == 7.0

    def test_nonfinite_off_origin_rejected(self):
        g = GridSpec(1, 8, np.pi)

        def bad(xi):
            return 1.0 / (np.sqrt(np.sum(xi ** 2, axis=0)) - 1.0)

        with pytest.raises(ValueError):
            evaluate_symbol(g, bad)

    def test_multiplier_identity(self):
        g = GridSpec(3, 8, 2.0)
        f = random_field(g)
        out = apply_multiplier(f, lambda xi: np.ones(g.shape))
        np.testing.assert_allclose(out.values, f.values, atol=1e-12)

    def test_multiplier_composition(self):
        g = GridSpec(3, 8, 2.0)
        f = random_field(g)
        lap = lambda xi: np.sum(xi ** 2, axis=0)
        twice = apply_multiplier(apply_multiplier(f, lap), lap)
        once = apply_multiplier(f, lambda xi: np.sum(xi ** 2, axis=0) ** 2)
        np.testing.assert_allclose(twice.values, once.values, atol=1e-10)


class TestNormsAndWeights:
    def test_norm_lp_constants(self):
        g = GridSpec(3, 8, 1.0)
        f = Field(g, np.full(g.shape, 2.0 + 0j))
        vol = (2.0 * g.half_width) ** g.n
        assert norm_lp(f, 2.0) == pytest.approx(2.0 * np.sqrt(vol))
        assert norm_lp(f, np.inf) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            norm_lp(f, 0.5)

    def test_weighted_l2_matches_direct_sum(self):
        g = GridSpec(3, 8, 2.0)
        f = random_field(g)
        w = weight_bracket_power(g, -1.0)
        direct = np.sqrt(np.sum(w ** 2 * np.abs(f.values) ** 2) * g.cell_volume)
        assert weighted_l2_norm(f, w) == pytest.approx(direct)

    def test_abs_weight_finite_at_origin(self):
        g = GridSpec(3, 8, 2.0)
        w = weight_abs_power(g, -2.0)
        assert np.all(np.isfinite(w))

    def test_boundary_decay(self):
        g = GridSpec(3, 16, 8.0)
        tight = field_from_function(g, lambda x: np.exp(-np.sum(x ** 2, axis=0)))
        wide = field_from_function(g, lambda x: np.exp(-np.sum(x ** 2, axis=0) / 64.0))
        assert boundary_decay(tight) < 1e-12
        assert boundary_decay(wide) > 0.1


class TestSerialization:
    def test_round_trip(self):
        g = GridSpec(3, 8, 2.5)
        f = random_field(g)
        buf = io.BytesIO()
        write_field(f, buf)
        buf.seek(0)
        back = read_field(buf)
        assert back.grid == GridSpec(3, 8, 2.5)
        assert back.rep == f.rep
        np.testing.assert_array_equal(back.values, f.values)

    def test_bad_magic_rejected(self):
        with pytest.raises(ValueError):
            read_field(io.BytesIO(b"NOPE" + b"\x00" * 64))

    def test_frequency_tag_preserved(self):
        g = GridSpec(1, 8, 1.0)
        f = forward_transform(random_field(g))
        buf = io.BytesIO()
        write_field(f, buf)
        buf.seek(0)
        assert read_field(buf).rep == "frequency"
