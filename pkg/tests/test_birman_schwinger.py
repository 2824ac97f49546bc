"""Dense Birman-Schwinger assembly, bound-state location, and the perturbed
resolvent identity."""

import numpy as np
import pytest

from polyharmlab.birman_schwinger import (
    apply_resolvent,
    assemble_M,
    detect_point_spectrum,
    detect_zero_resonance,
    inv_norm_sweep,
    neumann_threshold,
    perturbed_resolvent_apply,
    riesz_base_column,
    supersmooth_sweep,
)
from polyharmlab.grid import Field, GridSpec
from polyharmlab.hamiltonian import Hamiltonian, negative_spectrum
from polyharmlab.kernels import ResolventQuery
from polyharmlab.potentials import gaussian_well, potential_from_callable

RNG = np.random.default_rng(9)


def truncated_well(grid, depth, width=1.0, rcut=3.0, name=None):
    """Gaussian well hard-truncated at rcut: keeps the dense support set small."""
    def fn(*coords):
        r2 = sum(c ** 2 for c in coords)
        return np.where(r2 <= rcut ** 2, -depth * np.exp(-r2 / width ** 2), 0.0)
    return potential_from_callable(grid, fn, 2.0 * grid.n,
                                   name=name or f"trunc_well({depth:g})")


class TestAssembly:
    def test_gather_matches_columnwise(self):
        # the gathered block must equal literal column-by-column application
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 2.0, rcut=1.5)
        q = ResolventQuery(z=-1.0 + 0.5j, m=1, n=3)
        bs = assemble_M(pot, q)
        support = bs.support
        v = pot.v().reshape(-1)
        w = pot.w().reshape(-1)
        direct = np.zeros((support.size, support.size), dtype=np.complex128)
        for col, j in enumerate(support):
            delta = np.zeros(g.size, dtype=np.complex128)
            delta[j] = v[j]
            r0 = apply_resolvent(g, q, delta.reshape(g.shape)).reshape(-1)
            direct[:, col] = w[support] * r0[support]
        direct[np.diag_indices(support.size)] += 1.0
        np.testing.assert_allclose(bs.matrix, direct, atol=1e-12)

    def test_support_cap(self):
        g = GridSpec(3, 16, 6.0)
        pot = gaussian_well(g, 3.0)  # support covers the whole box
        q = ResolventQuery(z=-1.0 + 0.5j, m=1, n=3)
        with pytest.raises(ValueError):
            assemble_M(pot, q, support_cap=100)

    def test_riesz_column_newton_kernel(self):
        # the z = 0 base column is the free-space Newton kernel at
        # minimal-image distances (no image sums), origin cell regularized
        g = GridSpec(3, 32, 8.0)
        col = riesz_base_column(g, 1).reshape(-1)
        period = 2.0 * g.half_width
        d = g.coords() - g.coords()[:, :1, :1, :1]
        d = d - period * np.round(d / period)
        r = np.sqrt(np.sum(d ** 2, axis=0)).reshape(-1)
        for rv in (1.0, 2.0, 5.0):
            pick = np.argmin(np.abs(r - rv))
            expect = g.cell_volume / (4.0 * np.pi * r[pick])
            assert col[pick].real == pytest.approx(expect, rel=1e-12)
        # origin cell: volume-equivalent cell-averaged radius keeps it finite
        origin = col[0].real
        assert origin == pytest.approx(
            g.cell_volume / (4.0 * np.pi * g.origin_cell_radius()), rel=1e-12)
        # minimal-image distance never exceeds sqrt(n) * L
        assert np.max(r) <= np.sqrt(3.0) * g.half_width + 1e-12

    def test_inv_norm_reciprocal_sigma(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 2.0, rcut=1.5)
        bs = assemble_M(pot, ResolventQuery(z=-1.0 + 0.5j, m=1, n=3))
        assert bs.inv_norm() == pytest.approx(1.0 / bs.sigma_min(), rel=1e-12)


class TestBoundStates:
    def test_bs_roots_match_lanczos(self):
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 8.0, rcut=2.5)
        h = Hamiltonian(g, 1, pot)
        es = negative_spectrum(h)
        assert len(es) >= 1
        roots = detect_point_spectrum(pot, 1, (min(es.eigenvalues) * 1.4, -1e-3),
                                      scan_points=80)
        assert len(roots) >= 1
        uniq = sorted(set(np.round(es.eigenvalues, 6)))
        for e in uniq:
            assert min(abs(r - e) / abs(e) for r in roots) < 1e-3

    def test_interval_validation(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 2.0, rcut=1.5)
        with pytest.raises(ValueError):
            detect_point_spectrum(pot, 1, (-1.0, 1.0))

    def test_no_zero_resonance_generic(self):
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 2.0, rcut=2.5)
        smin, flag = detect_zero_resonance(pot, 1)
        assert smin > 1e-3
        assert not flag


class TestNeumannThreshold:
    def test_weak_coupling_threshold(self):
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 0.05, rcut=2.5)
        thr, rep = neumann_threshold(pot, 1, [0.25, 1.0, 4.0])
        assert np.isfinite(thr)
        assert rep.passes["found"]

    def test_radii_validation(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 1.0, rcut=1.5)
        with pytest.raises(ValueError):
            neumann_threshold(pot, 1, [])
        with pytest.raises(ValueError):
            neumann_threshold(pot, 1, [-1.0, 1.0])


class TestPerturbedResolvent:
    def test_second_resolvent_identity(self):
        # (H - z) R(z) f == f
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 4.0, rcut=2.5)
        h = Hamiltonian(g, 1, pot)
        q = ResolventQuery(z=-2.0 + 1.0j, m=1, n=3)
        f = Field(g, RNG.standard_normal(g.shape) + 1j * RNG.standard_normal(g.shape))
        rf = perturbed_resolvent_apply(pot, q, f)
        back = h.apply(rf).values - complex(q.z) * rf.values
        np.testing.assert_allclose(back, f.values, atol=1e-9 * np.max(np.abs(f.values)))

    def test_mixed_sign_potential(self):
        g = GridSpec(3, 12, 5.0)

        def fn(x, y, z):
            r2 = x ** 2 + y ** 2 + z ** 2
            return np.where(r2 <= 6.25, 3.0 * x * np.exp(-r2), 0.0)

        pot = potential_from_callable(g, fn, 6.0, name="dipole")
        h = Hamiltonian(g, 1, pot)
        q = ResolventQuery(z=-1.5 + 0.7j, m=1, n=3)
        f = Field(g, RNG.standard_normal(g.shape).astype(complex))
        rf = perturbed_resolvent_apply(pot, q, f)
        back = h.apply(rf).values - complex(q.z) * rf.values
        np.testing.assert_allclose(back, f.values, atol=1e-9 * np.max(np.abs(f.values)))


class TestSweeps:
    def test_inv_norm_sweep_excludes_point_spectrum(self):
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 2.0, rcut=2.5)
        rep = inv_norm_sweep(pot, 1, [0.5, 1.0, 1.5], [0.1, 0.03], nu=0.2,
                             point_spectrum=[1.0])
        lams = {row["lam"] for row in rep.rows}
        assert 1.0 not in lams
        assert rep.params["excluded_lambdas"] == [1.0]
        assert rep.passes["finite"]

    def test_theta_validation(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 1.0, rcut=1.5)
        with pytest.raises(ValueError):
            inv_norm_sweep(pot, 1, [1.0], [0.1, -0.1], nu=0.1)

    def test_supersmooth_gamma_window(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 1.0, rcut=1.5)
        with pytest.raises(ValueError):
            supersmooth_sweep(pot, 1, 0.75, 0.1, [1.0], [0.1])  # gamma > m - 1/2
        with pytest.raises(ValueError):
            supersmooth_sweep(pot, 1, -0.5, 0.1, [1.0], [0.1])  # gamma <= m - n/2

    def test_supersmooth_projected_needs_projector(self):
        g = GridSpec(3, 8, 3.0)
        pot = truncated_well(g, 1.0, rcut=1.5)
        with pytest.raises(ValueError):
            supersmooth_sweep(pot, 1, 0.5, 0.1, [1.0], [0.1], projected=True)

    def test_supersmooth_finite(self):
        g = GridSpec(3, 12, 5.0)
        pot = truncated_well(g, 1.0, rcut=2.5)
        rep = supersmooth_sweep(pot, 1, 0.5, 0.5, [1.0], [0.1])
        assert rep.passes["finite"]
        assert rep.metrics["sup"] > 0
