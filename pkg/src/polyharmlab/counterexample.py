"""Compactly supported smooth potentials embedding an eigenvalue at 1.

The kernel G of (1 - Delta)^{-1} satisfies Delta G = G away from the origin,
hence (-Delta)^m G = G there for even m.  Any strictly positive phi that
agrees with G outside a ball B(0, delta) therefore yields a potential

    V = phi^{-1} (phi - (-Delta)^m phi)

supported in B(0, delta) with ((-Delta)^m + V) phi = phi: an eigenvalue
embedded at 1 inside the essential spectrum [0, infinity).

Two constructions of phi are provided:

* "mollified" (default): phi = G * rho_sigma with a Gaussian mollifier, so
  phi-hat = e^{-sigma^2 xi^2 / 4} / (1 + |xi|^2) exactly and the numerator
  phi - (-Delta)^m phi = Q(-Delta) rho_sigma is an analytic bump of width
  sigma (Q the polynomial (1 - t^m)/(1 + t) in t = -Delta).  The grid phi is
  synthesized from the exact symbol, so the residual of the eigen-identity is
  limited only by the Gaussian tail of the symbol at the lattice Nyquist
  radius and collapses spectrally under refinement.  The support of V leaks
  by the Gaussian factor e^{-r^2/sigma^2}, quantified in the residual record.

* "blend": cap G's origin singularity by an even polynomial, phi(r) =
  chi(r) P(r^2) + (1 - chi(r)) G(r), with chi a smooth cutoff supported in
  r < delta and P the even polynomial of degree 2m + 2 matching G's value
  and first m + 1 derivatives in u = r^2 at r = delta (1 - eta), eta = 0.2.
  The cutoff's high derivatives multiply the P - G mismatch, so the
  constructed V carries sharp features of amplitude O(10^2-10^3), and the
  spectral (-Delta)^m applied to those features rings far outside the
  support ball where the potential is truncated to zero: measured
  eigen-residuals stay O(10) at practical grid sizes (14.8 / 52 / 64 at
  N = 24 / 48 / 96 in 3D).  Kept for its explicit radial profile; the
  mollified construction is the one that meets tight residual targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .grid import (
    Field,
    GridSpec,
    forward_transform,
    inverse_transform,
    read_field,
    write_field,
)
from .potentials import Potential
from .reporting import ProbeReport


@lru_cache(maxsize=32)
def _bessel_symbolic(n: int):
    """Sympy expression for the kernel of (1 - Delta)^{-1} in odd dimension n,
    built by the two-dimension recursion K_{n+2} = -(2 pi r)^{-1} dK_n/dr."""
    import sympy as sp

    r = sp.symbols("r", positive=True)
    g = sp.exp(-r) / (4 * sp.pi * r)
    for _ in range((n - 3) // 2):
        g = sp.simplify(-sp.diff(g, r) / (2 * sp.pi * r))
    return r, g


@lru_cache(maxsize=64)
def _cap_coefficients(m: int, n: int, r_match: float) -> tuple:
    """Taylor coefficients (c_0, ..., c_{m+1}) of G in the variable u = r^2
    around u_0 = r_match^2, so P(u) = sum_k c_k (u - u_0)^k matches G's value
    and first m + 1 u-derivatives at r_match."""
    import sympy as sp

    r, g = _bessel_symbolic(n)
    u = sp.symbols("u", positive=True)
    gu = g.subs(r, sp.sqrt(u))
    u0 = sp.Float(r_match * r_match, 30)
    coeffs = []
    expr = gu
    for k in range(m + 2):
        coeffs.append(float(expr.subs(u, u0)) / math.factorial(k))
        expr = sp.diff(expr, u)
    return tuple(coeffs)


def _cap_eval(coeffs: tuple, u0: float, u: np.ndarray) -> np.ndarray:
    du = u - u0
    out = np.zeros_like(du)
    for c in reversed(coeffs):
        out = out * du + c
    return out


def _smoothstep(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape)
    out[t <= 0.0] = 1.0
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    a = np.exp(-1.0 / ti)
    b = np.exp(-1.0 / (1.0 - ti))
    out[inside] = b / (a + b)
    return out


def bessel_kernel_radial(n: int, r: np.ndarray) -> np.ndarray:
    """Vectorized kernel of (1 - Delta)^{-1}; thin wrapper over the closed
    form shared with the resolvent kernels."""
    from .kernels import bessel_kernel

    return np.asarray(bessel_kernel(n, r))


def _check_parameters(m: int, n: int, delta: float) -> None:
    if m < 2 or m % 2 != 0:
        raise ValueError(
            f"even m >= 2 required ((-Delta)^m G = -G for odd m), got {m}")
    if n % 2 == 0 or n < 3:
        raise ValueError(f"odd n >= 3 required, got {n}")
    if delta <= 0:
        raise ValueError(f"support radius must be positive, got {delta}")


@dataclass(frozen=True)
class BlendProfile:
    """The radial profile phi: polynomial cap inside, Bessel kernel outside,
    smooth transition on [delta (1 - eta), delta]."""

    m: int
    n: int
    delta: float
    eta: float
    cap: tuple  # Taylor coefficients of P in u = r^2 around u0
    u0: float

    @property
    def r_match(self) -> float:
        return self.delta * (1.0 - self.eta)

    def cap_values(self, r: np.ndarray) -> np.ndarray:
        return _cap_eval(self.cap, self.u0, np.asarray(r, dtype=np.float64) ** 2)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        chi = _smoothstep((r - self.r_match) / (self.delta - self.r_match))
        out = chi * self.cap_values(r)
        outer = chi < 1.0
        if np.any(outer):
            out[outer] += (1.0 - chi[outer]) * bessel_kernel_radial(self.n, r[outer])
        return out


def make_blend_profile(m: int, n: int, delta: float, eta: float = 0.2) -> BlendProfile:
    """Construct the capped profile; rejects parameters whose polynomial cap
    is not strictly positive on [0, delta]."""
    _check_parameters(m, n, delta)
    if not 0 < eta < 1:
        raise ValueError(f"matching offset eta must lie in (0, 1), got {eta}")
    r_match = delta * (1.0 - eta)
    cap = _cap_coefficients(m, n, r_match)
    profile = BlendProfile(m, n, delta, eta, cap, r_match * r_match)
    r_check = np.linspace(0.0, delta, 4097)
    if np.min(profile.cap_values(r_check)) <= 0.0:
        raise ValueError(
            f"polynomial cap not strictly positive on [0, {delta:g}] "
            f"(m={m}, n={n}); parameters rejected"
        )
    return profile


def _image_offsets(n: int, period: float, corner: float, d_cut: float) -> np.ndarray:
    """Nonzero lattice offsets k with period*|k| - corner <= d_cut (images
    whose nearest approach to the box is within the kernel cutoff distance)."""
    radius = (d_cut + corner) / period
    s = int(math.ceil(radius))
    axis = np.arange(-s, s + 1)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    ks = np.stack([m.reshape(-1) for m in mesh], axis=1)
    norms = np.sqrt(np.sum(ks.astype(np.float64) ** 2, axis=1))
    keep = (norms > 0) & (norms <= radius)
    return ks[keep]


def _periodized_samples(grid: GridSpec, profile: BlendProfile,
                        image_rtol: float) -> np.ndarray:
    """Samples of sum_k phi(x + 2L k): the direct term plus Bessel-kernel
    images (every image lies far outside the cap ball, so only G contributes;
    images whose kernel value at nearest approach is below image_rtol times
    the profile peak are dropped)."""
    axes = grid.axis_coords()

    def shifted_r2(shift: np.ndarray) -> np.ndarray:
        r2 = np.zeros(grid.shape)
        for a in range(grid.n):
            shape = [1] * grid.n
            shape[a] = grid.npts
            r2 = r2 + (axes.reshape(shape) + shift[a]) ** 2
        return r2

    phi = profile(np.sqrt(shifted_r2(np.zeros(grid.n))))
    peak = float(np.max(phi))

    period = 2.0 * grid.half_width
    corner = grid.half_width * math.sqrt(grid.n)
    # distance beyond which the kernel drops below the image cutoff
    d_cut = 1.0
    while bessel_kernel_radial(profile.n, np.array([d_cut]))[0] > image_rtol * peak:
        d_cut += 0.5
    for kv in _image_offsets(grid.n, period, corner, d_cut):
        r2k = shifted_r2(period * kv.astype(np.float64))
        phi += bessel_kernel_radial(profile.n, np.sqrt(r2k))
    return phi


@dataclass(frozen=True)
class EmbeddedPair:
    """A potential V and state phi with ((-Delta)^m + V) phi = phi."""

    potential: Potential
    phi: Field
    delta: float
    m: int
    n: int
    residuals: Dict[str, float]

    @property
    def grid(self) -> GridSpec:
        return self.potential.grid


def _mollified_phi(grid: GridSpec, m: int, sigma: float, alias_shells: int = 1):
    """Grid samples of the periodized G * rho_sigma and of the numerator
    phi - (-Delta)^m phi, synthesized from the exact continuum symbol.

    The symbol is alias-summed over +-alias_shells Nyquist periods, so the
    synthesized values are exact samples of the periodized (strictly
    positive) function rather than its band-limited interpolant."""
    axis = grid.axis_freqs()
    width = 2.0 * grid.nyquist_radius
    shifts = np.arange(-alias_shells, alias_shells + 1) * width
    phi_hat = np.zeros(grid.shape)
    for kv in np.ndindex(*([2 * alias_shells + 1] * grid.n)):
        xi2 = np.zeros(grid.shape)
        for a in range(grid.n):
            shape = [1] * grid.n
            shape[a] = grid.npts
            xi2 = xi2 + ((axis + shifts[kv[a]]).reshape(shape)) ** 2
        phi_hat += np.exp(-sigma * sigma * xi2 / 4.0) / (1.0 + xi2)
    phi_hat *= (2.0 * np.pi) ** (-grid.n / 2.0)
    xi2 = grid.xi_radii() ** 2
    numer_hat = (1.0 - xi2 ** m) * phi_hat
    phi = inverse_transform(Field(grid, phi_hat.astype(np.complex128),
                                  "frequency")).values.real
    numer = inverse_transform(Field(grid, numer_hat.astype(np.complex128),
                                    "frequency")).values.real
    return phi, numer


def build_embedded_pair(grid: GridSpec, m: int, delta: float = 1.0,
                        method: str = "mollified",
                        sigma: Optional[float] = None,
                        eta: float = 0.2,
                        image_rtol: Optional[float] = None) -> EmbeddedPair:
    """Construct the embedded-eigenvalue pair on a grid.

    The potential is evaluated spectrally from the sampled profile and then
    truncated to the ball |x| <= delta + 2h, outside of which the continuum
    potential vanishes (mollified: up to the recorded Gaussian leak); the
    discarded exterior values are recorded as support_leak, not silently
    dropped.  The eigen-residual ||H phi - phi|| / ||phi|| measures exactly
    that truncation and decreases under N-refinement.
    """
    _check_parameters(m, grid.n, delta)
    if delta < 4.0 * grid.h:
        raise ValueError(
            f"support radius {delta:g} under-resolved: need delta >= 4h = "
            f"{4.0 * grid.h:.4g}"
        )
    if grid.half_width <= delta:
        raise ValueError(
            f"box half-width {grid.half_width:g} must exceed the support "
            f"radius {delta:g}"
        )

    if method == "mollified":
        if sigma is None:
            sigma = 0.135 * delta
        if not 0 < sigma < delta:
            raise ValueError(f"mollifier width must lie in (0, delta), got {sigma}")
        phi, numer = _mollified_phi(grid, m, sigma)
        params = {"sigma": sigma}
    elif method == "blend":
        profile = make_blend_profile(m, grid.n, delta, eta)
        if image_rtol is None:
            image_rtol = 1e-13 if grid.n == 3 else 1e-7
        phi = _periodized_samples(grid, profile, image_rtol)
        phat = forward_transform(Field(grid, phi.astype(np.complex128)))
        sym = grid.xi_radii() ** (2 * m)
        numer = phi - inverse_transform(
            Field(grid, sym * phat.values, "frequency")).values.real
        params = {"eta": eta, "image_rtol": image_rtol}
    else:
        raise ValueError(f"unknown construction {method!r}; "
                         "use 'mollified' or 'blend'")

    if np.min(phi) <= 0.0:
        raise ValueError("constructed profile not strictly positive on the grid")

    v_raw = numer / phi
    r = grid.radii()
    inside = r <= delta + 2.0 * grid.h
    v_vals = np.where(inside, v_raw, 0.0)
    leak = float(np.max(np.abs(v_raw[~inside]))) if np.any(~inside) else 0.0

    pot = Potential(grid, v_vals, decay_exponent=2.0 * grid.n,
                    name=f"embedded(m={m},n={grid.n},delta={delta:g},{method})")
    phi_field = Field(grid, phi.astype(np.complex128))
    pair = EmbeddedPair(pot, phi_field, delta, m, grid.n, {})
    residuals = {
        "eigen_residual": _eigen_residual(pair),
        "support_leak": leak,
        "positivity_margin": float(np.min(phi)),
        "max_abs_v": pot.max_abs,
        "method": method,
        **params,
    }
    object.__setattr__(pair, "residuals", residuals)
    return pair


def _eigen_residual(pair: EmbeddedPair) -> float:
    from .hamiltonian import Hamiltonian

    h = Hamiltonian(pair.grid, pair.m, pair.potential)
    hphi = h.apply(pair.phi)
    diff = hphi.values - pair.phi.values
    return float(np.linalg.norm(diff) / np.linalg.norm(pair.phi.values))


def verify_embedded(pair: EmbeddedPair) -> ProbeReport:
    """Recompute the eigen-residual, support leak, and positivity margin."""
    grid = pair.grid
    residual = _eigen_residual(pair)
    r = grid.radii()
    outside = r > pair.delta + 2.0 * grid.h
    post_leak = float(np.max(np.abs(pair.potential.values[outside]))) if np.any(outside) else 0.0
    margin = float(np.min(pair.phi.values.real))
    report = ProbeReport(
        name="embedded_pair",
        params={"m": pair.m, "n": pair.n, "delta": pair.delta},
        provenance={"grid": {"n": grid.n, "N": grid.npts, "L": grid.half_width}},
    )
    report.add_row(m=pair.m, n=pair.n, delta=pair.delta,
                   eigen_residual=residual,
                   support_leak=pair.residuals.get("support_leak", post_leak),
                   truncated_exterior_max=post_leak,
                   positivity_margin=margin,
                   max_abs_v=pair.potential.max_abs)
    report.metrics.update(
        eigen_residual=residual,
        support_leak=pair.residuals.get("support_leak", post_leak),
        positivity_margin=margin,
    )
    report.passes["phi_strictly_positive"] = margin > 0.0
    report.passes["exterior_truncated"] = post_leak <= pair.potential.tau_supp
    return report


def save_embedded_pair(pair: EmbeddedPair, directory) -> Path:
    """Persist as two field binaries plus a JSON manifest; returns the dir."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "potential.field", "wb") as fh:
        write_field(pair.potential.as_field(), fh)
    with open(directory / "phi.field", "wb") as fh:
        write_field(pair.phi, fh)
    manifest = {
        "m": pair.m,
        "n": pair.n,
        "delta": pair.delta,
        "residuals": pair.residuals,
        "grid": {"n": pair.grid.n, "N": pair.grid.npts, "L": pair.grid.half_width},
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return directory


def load_embedded_pair(directory) -> EmbeddedPair:
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    with open(directory / "potential.field", "rb") as fh:
        v_field = read_field(fh)
    with open(directory / "phi.field", "rb") as fh:
        phi = read_field(fh)
    pot = Potential(v_field.grid, v_field.values.real,
                    decay_exponent=2.0 * v_field.grid.n,
                    name=f"embedded(m={manifest['m']},n={manifest['n']},"
                         f"delta={manifest['delta']:g})")
    return EmbeddedPair(pot, phi, manifest["delta"], manifest["m"],
                        manifest["n"], manifest["residuals"])
