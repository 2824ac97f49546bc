"""Sampled real potentials and their Birman-Schwinger factorization.

A Potential carries V together with v = sqrt|V| and w = sgn(V) v (so V = w v
pointwise), the support set used for dense Birman-Schwinger assembly, and a
declared polynomial decay exponent that can be verified against the samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .grid import Field, GridSpec


@dataclass(frozen=True)
class Potential:
    """Real potential sampled on a grid.

    decay_exponent is metadata: the claim |V(x)| <= C <x>^{-s}; the constant
    C is fitted, not assumed (see fitted_decay_constant).
    """

    grid: GridSpec
    values: np.ndarray
    decay_exponent: float
    name: str = "potential"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def tau_supp(self) -> float:
        """Support truncation threshold: 1e-12 x max|V|."""
        return 1e-12 * self.max_abs

    def v(self) -> np.ndarray:
        return np.sqrt(np.abs(self.values))

    def w(self) -> np.ndarray:
        return np.sign(self.values) * np.sqrt(np.abs(self.values))

    def support_indices(self) -> np.ndarray:
        """Flat indices of the support set {|V| > tau_supp}, sorted."""
        flat = np.abs(self.values).reshape(-1)
        return np.flatnonzero(flat > self.tau_supp)

    def as_field(self) -> Field:
        return Field(self.grid, self.values.astype(np.complex128))

    def fitted_decay_constant(self) -> float:
        """Smallest C with |V(x)| <= C <x>^{-s} on the grid samples."""
        r = self.grid.radii()
        bracket = np.sqrt(1.0 + r ** 2)
        return float(np.max(np.abs(self.values) * bracket ** self.decay_exponent))

    def verify_decay(self, c: Optional[float] = None) -> bool:
        """Check |V(x)| <= C <x>^{-s} on all samples (trivially true for the
        fitted constant; useful with an externally supplied C)."""
        if c is None:
            c = self.fitted_decay_constant()
        r = self.grid.radii()
        bracket = np.sqrt(1.0 + r ** 2)
        return bool(np.all(np.abs(self.values) <= c * bracket ** (-self.decay_exponent) + 1e-300))

    def scaled(self, coupling: float, name: Optional[str] = None) -> "Potential":
        return Potential(self.grid, coupling * self.values, self.decay_exponent,
                         name or f"{self.name}*{coupling:g}")


def gaussian_well(grid: GridSpec, depth: float, width: float = 1.0,
                  center: Optional[tuple] = None, name: Optional[str] = None) -> Potential:
    """V(x) = -depth exp(-|x - c|^2 / width^2): attractive for depth > 0."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    coords = grid.coords()
    if center is None:
        center = (0.0,) * grid.n
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    vals = -depth * np.exp(-r2 / width ** 2)
    # a Gaussian beats any polynomial decay rate; declare a generic fast one
    return Potential(grid, vals, decay_exponent=2.0 * grid.n,
                     name=name or f"gauss(depth={depth:g},width={width:g})")


def bracket_decay(grid: GridSpec, amplitude: float, s: float,
                  name: Optional[str] = None) -> Potential:
    """V(x) = amplitude <x>^{-s}; repulsive for amplitude > 0."""
    if s <= 0:
        raise ValueError(f"decay exponent must be positive, got {s}")
    r = grid.radii()
    vals = amplitude * (1.0 + r ** 2) ** (-s / 2.0)
    return Potential(grid, vals, decay_exponent=s,
                     name=name or f"bracket(a={amplitude:g},s={s:g})")


def potential_from_callable(grid: GridSpec, fn: Callable, decay_exponent: float,
                            name: str = "custom") -> Potential:
    """Sample V(x1, ..., xn) = fn(*coords) on the grid."""
    vals = np.asarray(fn(*grid.coords()), dtype=np.float64)
    return Potential(grid, vals, decay_exponent, name)


def zero_potential(grid: GridSpec) -> Potential:
    return Potential(grid, np.zeros(grid.shape), decay_exponent=2.0 * grid.n,
                     name="zero")
