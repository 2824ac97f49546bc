"""Dense Birman-Schwinger operator M(z) = I + w R0(z) v on the potential's
support set, bound-state and zero-resonance detection, the perturbed resolvent,
and supersmoothing sweeps.

The sandwiched resolvent w R0(z) v is translation-invariant between grid
points, so the dense block is gathered from a single resolvent column (the
multiplier applied to a delta at the origin index) instead of one transform
per support point; the result is identical to the column-by-column definition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .grid import Field, GridSpec, forward_transform, inverse_transform, weight_abs_power, weight_bracket_power
from .kernels import ResolventQuery, riesz_kernel
from .operators import operator_norm
from .potentials import Potential
from .reporting import ProbeReport
from .resolvent import boundary_symbol

DENSE_SVD_CAP = 2000
DEFAULT_SUPPORT_CAP = 6000


def resolvent_symbol_array(grid: GridSpec, q: ResolventQuery) -> np.ndarray:
    """Lattice symbol of R0(z): boundary-regularized on the positive half-line,
    plain 1/(|xi|^{2m} - z) elsewhere.  z = 0 is handled by the Riesz kernel
    path (see riesz_base_column), not here."""
    if complex(q.z) == 0:
        raise ValueError("z = 0 resolvent uses the Riesz kernel, not a symbol")
    if q.side is not None:
        return boundary_symbol(grid, float(np.real(q.z)), q.m, q.side)
    return q.symbol(grid.xi_radii())


def apply_resolvent(grid: GridSpec, q: ResolventQuery, values: np.ndarray) -> np.ndarray:
    """R0(z) applied to a physical-space array (returns physical array)."""
    fld = Field(grid, np.asarray(values, dtype=np.complex128))
    fhat = forward_transform(fld)
    sym = resolvent_symbol_array(grid, q)
    return inverse_transform(Field(grid, sym * fhat.values, "frequency")).values


def resolvent_base_column(grid: GridSpec, q: ResolventQuery) -> np.ndarray:
    """R0(z) applied to the delta at flat index 0; every other column of the
    grid resolvent is a periodic shift of this one."""
    delta = np.zeros(grid.shape, dtype=np.complex128)
    delta[(0,) * grid.n] = 1.0
    return apply_resolvent(grid, q, delta)


def riesz_base_column(grid: GridSpec, m: int) -> np.ndarray:
    """Base column of R0(0) = (-Delta)^{-m} built from the closed-form Riesz
    kernel c r^{2m-n} at minimal-image distances, with the origin cell using
    the volume-equivalent cell-averaged radius."""
    coords = grid.coords()
    period = 2.0 * grid.half_width
    # minimal-image displacement from the grid point at flat index 0
    base_pt = [c.reshape(-1)[0] for c in coords]
    r2 = np.zeros(grid.shape)
    for c, b in zip(coords, base_pt):
        d = c - b
        d = d - period * np.round(d / period)
        r2 = r2 + d ** 2
    r = np.sqrt(r2)
    r[(0,) * grid.n] = grid.origin_cell_radius()
    return (riesz_kernel(m, grid.n, r) * grid.cell_volume).astype(np.complex128)


@dataclass
class BSMatrix:
    """M(z) = I + w R0(z) v restricted to the potential's support set."""

    query: ResolventQuery
    matrix: np.ndarray
    support: np.ndarray  # flat grid indices, sorted
    grid: GridSpec
    potential_name: str = ""
    _lu: Optional[tuple] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return int(self.support.size)

    def sigma_min(self) -> float:
        return sigma_min(self.matrix)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            self._lu = scipy.linalg.lu_factor(self.matrix)
        return scipy.linalg.lu_solve(self._lu, rhs)

    def inv_norm(self) -> float:
        """||M^{-1}||_2 = 1 / sigma_min."""
        s = self.sigma_min()
        if s == 0.0:
            return np.inf
        return 1.0 / s


def sigma_min(matrix: np.ndarray) -> float:
    """Smallest singular value: dense SVD up to DENSE_SVD_CAP, inverse
    iteration with an LU solve beyond it."""
    nn = matrix.shape[0]
    if nn == 0:
        return 1.0
    if nn <= DENSE_SVD_CAP:
        return float(scipy.linalg.svdvals(matrix)[-1])
    try:
        lu = scipy.linalg.lu_factor(matrix)
    except scipy.linalg.LinAlgError:
        return 0.0
    rng = np.random.default_rng(7)
    v = rng.standard_normal(nn) + 1j * rng.standard_normal(nn)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(40):
        # one step of inverse iteration on M^H M
        u = scipy.linalg.lu_solve(lu, v)
        u = scipy.linalg.lu_solve(lu, u, trans=2)
        nu = np.linalg.norm(u)
        new_est = np.sqrt(1.0 / nu) if nu > 0 else 0.0
        v = u / nu
        if est and abs(new_est - est) <= 1e-8 * est:
            est = new_est
            break
        est = new_est
    return float(est)


def _gather_block(grid: GridSpec, base_column: np.ndarray, support: np.ndarray) -> np.ndarray:
    """G[i, j] = base_column[(idx_i - idx_j) mod N per axis]."""
    multis = np.unravel_index(support, grid.shape)
    npts = grid.npts
    flat = base_column.reshape(-1)
    offsets = np.zeros((support.size, support.size), dtype=np.int64)
    stride = 1
    # build flat index of the componentwise difference, last axis fastest
    for axis in range(grid.n - 1, -1, -1):
        ki = multis[axis][:, None]
        kj = multis[axis][None, :]
        offsets += ((ki - kj) % npts) * stride
        stride *= npts
    return flat[offsets]


def assemble_M(pot: Potential, q: ResolventQuery,
               support_cap: int = DEFAULT_SUPPORT_CAP) -> BSMatrix:
    """M(z) = I + w R0(z) v as a dense matrix on the support set."""
    grid = pot.grid
    support = pot.support_indices()
    if support.size > support_cap:
        raise ValueError(
            f"support set size {support.size} exceeds dense cap {support_cap}"
        )
    if support.size == 0:
        return BSMatrix(q, np.zeros((0, 0), dtype=np.complex128), support, grid,
                        pot.name)
    if complex(q.z) == 0:
        base = riesz_base_column(grid, q.m)
    else:
        base = resolvent_base_column(grid, q)
    g_block = _gather_block(grid, base, support)
    v = pot.v().reshape(-1)[support]
    w = pot.w().reshape(-1)[support]
    mat = w[:, None] * g_block * v[None, :]
    mat[np.diag_indices(support.size)] += 1.0
    return BSMatrix(q, mat, support, grid, pot.name)


def neumann_threshold(pot: Potential, m: int, radii: Iterable[float],
                      n_args: int = 4) -> Tuple[float, ProbeReport]:
    """Smallest sampled radius r with ||w R0(z) v|| <= 1/2 on the circle
    |z| = r (interior sample arguments plus both boundary sides at real z)."""
    radii = np.sort(np.asarray(list(radii), dtype=float))
    if radii.size == 0 or radii[0] <= 0:
        raise ValueError("radii must be positive")
    n = pot.grid.n
    report = ProbeReport(
        name="neumann_threshold",
        params={"m": m, "n": n, "potential": pot.name},
    )
    threshold = np.inf
    for r in radii:
        worst = 0.0
        queries = [ResolventQuery(z=complex(r), m=m, n=n, side="+"),
                   ResolventQuery(z=complex(r), m=m, n=n, side="-")]
        for k in range(1, n_args):
            ang = 2.0 * np.pi * k / n_args
            queries.append(ResolventQuery(z=r * np.exp(1j * ang), m=m, n=n))
        for q in queries:
            bs = assemble_M(pot, q)
            kmat = bs.matrix - np.eye(bs.size)
            norm = float(scipy.linalg.svdvals(kmat)[0]) if bs.size else 0.0
            worst = max(worst, norm)
        report.add_row(radius=r, max_norm=worst, passes=worst <= 0.5)
        if worst <= 0.5 and not np.isfinite(threshold):
            threshold = float(r)
    report.metrics["threshold"] = threshold
    report.passes["found"] = bool(np.isfinite(threshold))
    return threshold, report


def inv_norm_sweep(pot: Potential, m: int, lambdas: Sequence[float],
                   thetas: Sequence[float], nu: float,
                   point_spectrum: Sequence[float] = ()) -> ProbeReport:
    """Table of ||M^{-1}(lambda +/- i theta)|| over the sweep, with the
    nu-neighborhoods of known point spectrum excluded from the lambda grid."""
    lambdas = np.asarray(sorted(lambdas), dtype=float)
    thetas = np.sort(np.asarray(list(thetas), dtype=float))[::-1]
    if np.any(thetas <= 0):
        raise ValueError("theta ladder must be positive")
    keep = np.ones(lambdas.size, dtype=bool)
    for ev in point_spectrum:
        keep &= np.abs(lambdas - ev) >= nu
    excluded = lambdas[~keep]
    lambdas = lambdas[keep]
    n = pot.grid.n
    report = ProbeReport(
        name="inv_norm_sweep",
        params={"m": m, "n": n, "nu": nu, "potential": pot.name,
                "excluded_lambdas": list(map(float, excluded))},
    )
    sup = 0.0
    sup_by_theta = {}
    for lam in lambdas:
        for th in thetas:
            for side, sgn in (("+", 1.0), ("-", -1.0)):
                q = ResolventQuery(z=complex(lam, sgn * th), m=m, n=n)
                bs = assemble_M(pot, q)
                smin = bs.sigma_min()
                norm = 1.0 / smin if smin > 0 else np.inf
                report.add_row(lam=lam, theta=th, side=side, norm=norm,
                               sigma_min=smin, iterations=0)
                sup = max(sup, norm)
                key = float(th)
                sup_by_theta[key] = max(sup_by_theta.get(key, 0.0), norm)
    report.metrics["sup"] = sup
    if thetas.size >= 2:
        a, b = sup_by_theta[float(thetas[-1])], sup_by_theta[float(thetas[-2])]
        report.metrics["plateau_ratio"] = a / b if b else np.inf
    report.passes["finite"] = bool(np.isfinite(sup))
    return report


def detect_zero_resonance(pot: Potential, m: int, tau_res: float = 1e-3,
                          refined: Optional[Potential] = None):
    """Smallest singular value of M(0) plus a resonance-suspect flag.

    The flag is raised when sigma_min < tau_res and, if a refined-grid
    potential is supplied, sigma_min fails to grow under the refinement."""
    q = ResolventQuery(z=0.0, m=m, n=pot.grid.n)
    smin = assemble_M(pot, q).sigma_min()
    flag = smin < tau_res
    if flag and refined is not None:
        q2 = ResolventQuery(z=0.0, m=m, n=refined.grid.n)
        smin_ref = assemble_M(refined, q2).sigma_min()
        flag = smin_ref < 2.0 * smin  # did not grow: still suspect
    return float(smin), bool(flag)


def _sigma_at(pot: Potential, m: int, e: float) -> float:
    q = ResolventQuery(z=complex(e), m=m, n=pot.grid.n)
    return assemble_M(pot, q).sigma_min()


def detect_point_spectrum(pot: Potential, m: int,
                          interval: Tuple[float, float],
                          scan_points: int = 200,
                          tol: float = 1e-6,
                          sigma_tol: float = 1e-2) -> List[float]:
    """Negative eigenvalues of H located as the E < 0 where M(E) turns
    singular: coarse scan of sigma_min then derivative-sign bisection on each
    dip, refined to tol in E."""
    a, b = float(interval[0]), float(interval[1])
    if not (a < b < 0.0):
        raise ValueError(f"interval must lie in (-inf, 0), got {interval}")
    es = np.linspace(a, b, scan_points)
    sig = np.array([_sigma_at(pot, m, e) for e in es])
    roots: List[float] = []
    for i in range(1, scan_points - 1):
        if sig[i] <= sig[i - 1] and sig[i] < sig[i + 1]:
            lo, hi = es[i - 1], es[i + 1]
            # bisect on the sign of the sigma_min slope
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                step = max((hi - lo) * 0.05, tol * 0.1)
                if _sigma_at(pot, m, mid + step) < _sigma_at(pot, m, mid - step):
                    lo = mid
                else:
                    hi = mid
            e_root = 0.5 * (lo + hi)
            if _sigma_at(pot, m, e_root) < sigma_tol:
                roots.append(float(e_root))
    return roots


def perturbed_resolvent_apply(pot: Potential, q: ResolventQuery, f: Field,
                              bs: Optional[BSMatrix] = None) -> Field:
    """R(z) f for H = (-Delta)^m + V via the factorized second-resolvent
    formula R = R0 - R0 v M^{-1} w R0 with M = I + w R0 v.

    (With M in this convention the inner factors must appear in the order
    v M^{-1} w for mixed-sign V; for sign-definite V the orders coincide.)"""
    grid = pot.grid
    if f.rep != "physical":
        f = inverse_transform(f)
    if bs is None:
        bs = assemble_M(pot, q)
    g0 = apply_resolvent(grid, q, f.values)
    if bs.size == 0:
        return Field(grid, g0)
    support = bs.support
    w = pot.w().reshape(-1)[support]
    v = pot.v().reshape(-1)[support]
    rhs = w * g0.reshape(-1)[support]
    coeffs = bs.solve(rhs)
    spread = np.zeros(grid.size, dtype=np.complex128)
    spread[support] = v * coeffs
    correction = apply_resolvent(grid, q, spread.reshape(grid.shape))
    return Field(grid, g0 - correction)


def supersmooth_sweep(pot: Potential, m: int, gamma: float, eps: float,
                      lambdas: Sequence[float], thetas: Sequence[float],
                      projected: bool = False,
                      projector: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                      rng: Optional[np.random.Generator] = None,
                      max_iter: int = 50) -> ProbeReport:
    """Sup over the sweep of ||W |D|^gamma [P_ac] R(z) [P_ac] |D|^gamma W||.

    gamma must satisfy m - n/2 < gamma <= m - 1/2; at the upper edge the
    weight is <x>^{-1/2-eps}, otherwise |x|^{-m+gamma}.  With projected=True a
    projector callback (physical flat array -> physical flat array) must be
    supplied and the lambda grid may cross eigenvalue neighborhoods.
    """
    grid = pot.grid
    n = grid.n
    if not (m - n / 2.0 < gamma <= m - 0.5):
        raise ValueError(f"gamma={gamma} outside (m - n/2, m - 1/2]")
    if projected and projector is None:
        raise ValueError("projected sweep needs a projector callback")
    if rng is None:
        rng = np.random.default_rng(0)
    if gamma == m - 0.5:
        wgt = weight_bracket_power(grid, -(0.5 + eps))
    else:
        wgt = weight_abs_power(grid, gamma - m)
    dsym = grid.xi_radii() ** gamma
    if gamma < 0:
        dsym[(0,) * n] = 0.0  # zero-frequency rule for negative-order |D|^gamma
    elif gamma == 0:
        dsym = np.ones(grid.shape)

    def half_sandwich(vec: np.ndarray) -> np.ndarray:
        """|D|^gamma (W vec) as a physical array."""
        fld = Field(grid, (wgt * vec.reshape(grid.shape)))
        fhat = forward_transform(fld)
        return inverse_transform(Field(grid, dsym * fhat.values, "frequency")).values

    def half_sandwich_out(vec: np.ndarray) -> np.ndarray:
        """W (|D|^gamma vec): adjoint order of half_sandwich (both factors are
        self-adjoint, so this is the conjugate-transpose composition)."""
        fhat = forward_transform(Field(grid, vec))
        mid = inverse_transform(Field(grid, dsym * fhat.values, "frequency")).values
        return wgt * mid

    report = ProbeReport(
        name="supersmooth_sweep",
        params={"m": m, "n": n, "gamma": gamma, "eps": eps,
                "projected": projected, "potential": pot.name},
        provenance={"grid": {"n": grid.n, "N": grid.npts, "L": grid.half_width}},
    )
    sup = 0.0
    sup_by_theta = {}
    for lam in lambdas:
        for th in np.sort(np.asarray(list(thetas)))[::-1]:
            for side_sign in (1.0, -1.0):
                z = complex(lam, side_sign * th)
                q = ResolventQuery(z=z, m=m, n=n)
                qc = ResolventQuery(z=np.conj(z), m=m, n=n)
                bs = assemble_M(pot, q)
                bsc = assemble_M(pot, qc)

                def apply_a(vec, _q=q, _bs=bs):
                    u = half_sandwich(vec)
                    if projected:
                        u = projector(u)
                    r = perturbed_resolvent_apply(
                        pot, _q, Field(grid, u.reshape(grid.shape)), bs=_bs
                    ).values.reshape(-1)
                    if projected:
                        r = projector(r)
                    return half_sandwich_out(r.reshape(grid.shape)).reshape(-1)

                def apply_a_adj(vec, _q=qc, _bs=bsc):
                    u = half_sandwich(vec)
                    if projected:
                        u = projector(u)
                    r = perturbed_resolvent_apply(
                        pot, _q, Field(grid, u.reshape(grid.shape)), bs=_bs
                    ).values.reshape(-1)
                    if projected:
                        r = projector(r)
                    return half_sandwich_out(r.reshape(grid.shape)).reshape(-1)

                est = operator_norm(apply_a, apply_a_adj, grid.size, rng=rng,
                                    max_iter=max_iter)
                report.add_row(lam=lam, theta=th,
                               side="+" if side_sign > 0 else "-",
                               norm=est.norm, sigma_min=bs.sigma_min() if bs.size else 1.0,
                               iterations=est.iterations)
                sup = max(sup, est.norm)
                key = float(th)
                sup_by_theta[key] = max(sup_by_theta.get(key, 0.0), est.norm)
    report.metrics["sup"] = sup
    ths = sorted(sup_by_theta)
    if len(ths) >= 2:
        report.metrics["plateau_ratio"] = (
            sup_by_theta[ths[0]] / sup_by_theta[ths[1]]
            if sup_by_theta[ths[1]] else np.inf
        )
    report.passes["finite"] = bool(np.isfinite(sup))
    return report
