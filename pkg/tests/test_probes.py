"""Admissible pairs, sample families, and the space-time / scaling probes."""

from fractions import Fraction

import numpy as np
import pytest

from polyharmlab.grid import GridSpec
from polyharmlab.hamiltonian import Hamiltonian
from polyharmlab.potentials import bracket_decay, gaussian_well, zero_potential
from polyharmlab.probes import (
    AdmissiblePair,
    bandlimited_samples,
    frequency_localized_samples,
    inhomogeneous_smoothing_probe,
    kato_smoothing_probe,
    plateau_increments,
    sobolev_scaling_probe,
    stein_weiss_probe,
    stein_weiss_satisfied,
    strichartz_probe,
    validate_admissible,
)


class TestAdmissiblePairs:
    def test_valid_pairs(self):
        AdmissiblePair(2, 10, Fraction(5, 4))
        AdmissiblePair(Fraction(8, 3), 4, Fraction(3, 2))
        AdmissiblePair(np.inf, 2, Fraction(3, 2))

    def test_forbidden_endpoint(self):
        assert not validate_admissible(2, np.inf, 1)
        with pytest.raises(ValueError):
            AdmissiblePair(2, np.inf, 1)

    def test_relation_must_hold_exactly(self):
        assert validate_admissible(Fraction(8, 3), 4, Fraction(3, 2))
        assert not validate_admissible(Fraction(8, 3), 4, Fraction(7, 5))
        assert not validate_admissible(3, 4, Fraction(3, 2))

    def test_range_bounds(self):
        assert not validate_admissible(1.5, 6, 2)  # p < 2
        assert not validate_admissible(4, 1.5, 2)  # q < 2

    def test_float_inputs(self):
        assert validate_admissible(2.0, 10.0, 1.25)
        assert validate_admissible(np.inf, 2.0, 0.5)


class TestPlateauIncrements:
    def test_basic(self):
        assert plateau_increments([1.0, 2.0, 4.0]) == [1.0, 1.0]

    def test_flat(self):
        incs = plateau_increments([3.0, 3.0, 3.0])
        assert incs == [0.0, 0.0]

    def test_zero_start(self):
        assert plateau_increments([0.0, 1.0]) == [np.inf]


class TestSampleFamilies:
    def test_frequency_localized_normalized(self):
        g = GridSpec(3, 32, 6.0)
        packs = frequency_localized_samples(g, 4, np.random.default_rng(3))
        assert len(packs) == 4
        for f in packs:
            assert f.norm2() == pytest.approx(1.0, rel=1e-12)

    def test_frequency_localized_reproducible(self):
        g = GridSpec(3, 32, 6.0)
        a = frequency_localized_samples(g, 3, np.random.default_rng(5))
        b = frequency_localized_samples(g, 3, np.random.default_rng(5))
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa.values, fb.values)

    def test_bandlimited_grid_transferable(self):
        # same seed, same box: the coarse-grid samples are exact restrictions
        # of the fine-grid samples to the shared lattice points
        coarse = GridSpec(3, 8, 6.0)
        fine = GridSpec(3, 16, 6.0)
        a = bandlimited_samples(coarse, 2, np.random.default_rng(11), 3, 1.0, 0.3)
        b = bandlimited_samples(fine, 2, np.random.default_rng(11), 3, 1.0, 0.3)
        for fa, fb in zip(a, b):
            np.testing.assert_allclose(fa.values, fb.values[::2, ::2, ::2],
                                       atol=1e-12)

    def test_bandlimited_validation(self):
        g = GridSpec(3, 8, 6.0)
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            bandlimited_samples(g, 1, rng, 0, 1.0, 0.3)
        with pytest.raises(ValueError):
            bandlimited_samples(g, 1, rng, 4, 1.0, 0.3)  # needs npts >= 10
        with pytest.raises(ValueError):
            bandlimited_samples(g, 1, rng, 3, -1.0, 0.3)


class TestKatoSmoothingProbe:
    def test_free_case_finite(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        rep = kato_smoothing_probe(h, 0.25, t_final=2.0, samples=2,
                                   refine_iters=0,
                                   rng=np.random.default_rng(2))
        assert rep.passes["finite"]
        assert rep.metrics["sup_ratio_samples"] > 0
        assert len(rep.metrics["plateau_increments"]) == 2

    def test_refinement_never_below_samples(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        base = kato_smoothing_probe(h, 0.25, t_final=1.0, samples=2,
                                    refine_iters=0,
                                    rng=np.random.default_rng(2))
        ref = kato_smoothing_probe(h, 0.25, t_final=1.0, samples=2,
                                   refine_iters=2,
                                   rng=np.random.default_rng(2))
        assert ref.metrics["sup_ratio_refined"] >= base.metrics["sup_ratio_samples"] - 1e-12

    def test_gamma_window_enforced(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        with pytest.raises(ValueError):
            kato_smoothing_probe(h, 0.75)  # above m - 1/2
        with pytest.raises(ValueError):
            kato_smoothing_probe(h, -0.5)  # at/below m - n/2
        with pytest.raises(ValueError):
            kato_smoothing_probe(h, 0.25, t_final=-1.0)


class TestStrichartzProbe:
    def test_free_standard_mode(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        pair = AdmissiblePair(Fraction(8, 3), 4, Fraction(3, 2))
        rep = strichartz_probe(h, pair, t_final=2.0, samples=2,
                               rng=np.random.default_rng(4))
        assert rep.passes["finite"]
        assert rep.metrics["sup_ratio"] > 0

    def test_gain_mode_records_embedding(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 2, zero_potential(g))
        pair = AdmissiblePair(4, 3, Fraction(3, 2))
        rep = strichartz_probe(h, pair, mode="gain", t_final=2.0, samples=2,
                               rng=np.random.default_rng(4))
        assert rep.metrics["sobolev_fitted_constant"] > 0
        assert rep.metrics["sobolev_partner_q1"] > rep.params["q"]

    def test_alpha_mismatch_rejected(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        pair = AdmissiblePair(2, 10, Fraction(5, 4))  # alpha for m=2, n=5
        with pytest.raises(ValueError):
            strichartz_probe(h, pair)
        with pytest.raises(ValueError):
            strichartz_probe(h, AdmissiblePair(Fraction(8, 3), 4, Fraction(3, 2)),
                             mode="nope")


class TestInhomogeneousSmoothing:
    def test_forced_free_case(self):
        g = GridSpec(3, 16, 6.0)
        h = Hamiltonian(g, 1, zero_potential(g))
        rep = inhomogeneous_smoothing_probe(h, 0.25, t_final=2.0, samples=2,
                                            rng=np.random.default_rng(6))
        assert rep.passes["finite"]
        assert rep.metrics["sup_ratio"] > 0


class TestSobolevScalingProbe:
    def test_validations(self):
        g = GridSpec(3, 16, 6.0)
        with pytest.raises(ValueError):
            sobolev_scaling_probe(g, 1, 0.5, 6.0 / 5.0, 6.0, [1.0, 3.0, 40.0],
                                  z_arg=0.0)  # ray on the positive axis
        with pytest.raises(ValueError):
            sobolev_scaling_probe(g, 1, 0.5, 6.0 / 5.0, 6.0, [1.0, 2.0, 4.0])
        with pytest.raises(ValueError):
            sobolev_scaling_probe(g, 1, 2.5, 6.0 / 5.0, 6.0, [1.0, 3.0, 40.0])
        with pytest.raises(ValueError):
            # 1/p - 1/q below 2/(n+1)
            sobolev_scaling_probe(g, 1, 0.5, 2.2, 4.0, [1.0, 3.0, 40.0])

    def test_free_laplacian_quick(self):
        # scale-invariant exponent set: expected slope exactly zero
        g = GridSpec(3, 48, 8.0)
        rep = sobolev_scaling_probe(g, 1, 0.5, 4.0 / 3.0, 4.0,
                                    np.logspace(-0.5, 1.0, 4), samples=2,
                                    rng=np.random.default_rng(8))
        assert rep.metrics["expected_slope"] == pytest.approx(0.0, abs=1e-12)
        assert all(row["norm"] > 0 for row in rep.rows)
        assert rep.metrics["decades"] >= 1.5


class TestSteinWeiss:
    def test_satisfied_predicate(self):
        assert stein_weiss_satisfied(2.0, 0.5, 0.5, 3)
        assert not stein_weiss_satisfied(3.0, 0.0, 0.0, 3)  # lam = n excluded
        assert not stein_weiss_satisfied(0.2, 1.6, 1.2, 3)  # alpha > n/2
        assert not stein_weiss_satisfied(2.0, 0.4, 0.5, 3)  # sum != n

    def test_identity_symbol_norm_one(self):
        # lam = n makes the multiplier trivial and both weights flat
        rep = stein_weiss_probe(3.0, 0.0, 0.0, 3, npts_ladder=(8, 16),
                                rng=np.random.default_rng(1))
        for row in rep.rows:
            assert row["norm"] == pytest.approx(1.0, rel=1e-6)
        assert rep.passes["stabilized"]
        assert not rep.metrics["satisfied"]

    def test_satisfied_stabilizes_violating_grows(self):
        sat = stein_weiss_probe(2.0, 0.5, 0.5, 3, npts_ladder=(8, 16, 32),
                                rng=np.random.default_rng(1), stab_tol=0.2)
        vio = stein_weiss_probe(0.2, 1.6, 1.2, 3, npts_ladder=(8, 16, 32),
                                rng=np.random.default_rng(1), stab_tol=0.2)
        assert sat.metrics["satisfied"]
        assert sat.metrics["last_rel_change"] < vio.metrics["last_rel_change"]
        assert vio.metrics["norms"][-1] > 1.3 * vio.metrics["norms"][-2]

    def test_ladder_validation(self):
        with pytest.raises(ValueError):
            stein_weiss_probe(2.0, 0.5, 0.5, 3, npts_ladder=(8,))
