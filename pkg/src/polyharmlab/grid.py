"""Periodic spectral grid on [-L, L]^n with unitary discrete Fourier transforms.

The physical lattice is x_j = -L + j*h per axis (h = 2L/N) and the frequency
lattice is xi_k = (pi/L)*k with k in {-N/2, ..., N/2 - 1}.  The transforms use
the unitary continuum normalization

    fhat(xi) = (2*pi)^(-n/2) * sum_j f(x_j) e^{-i xi . x_j} h^n,

so Parseval holds without conversion factors: the discrete L^2 norm (with cell
volume h^n on the physical side, h_xi^n on the frequency side) is identical in
both representations.

Frequency-side arrays are stored in FFT ordering (numpy.fft.fftfreq), row-major
over axes, matching the physical layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import BinaryIO, Callable, Union

import numpy as np

PHYSICAL = "physical"
FREQUENCY = "frequency"

#: Default cap on total grid points (N^n); guards against accidental huge FFTs.
DEFAULT_MAX_POINTS = 2 ** 25


class RepresentationError(ValueError):
    """A field was passed in the wrong representation (physical vs frequency)."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic discretization of [-L, L]^n.

    n must be odd (closed-form kernels exist for odd dimensions only) and N
    even so the frequency lattice is symmetric about zero.
    """

    n: int
    npts: int
    half_width: float
    max_points: int = DEFAULT_MAX_POINTS

    def __post_init__(self):
        if self.n < 1 or self.n % 2 == 0:
            raise ValueError(f"dimension must be odd, got n={self.n}")
        if self.npts < 4 or self.npts % 2 != 0:
            raise ValueError(f"points-per-axis must be even and >= 4, got N={self.npts}")
        if not self.half_width > 0:
            raise ValueError(f"half-width must be positive, got L={self.half_width}")
        if self.npts ** self.n > self.max_points:
            raise ValueError(
                f"grid has {self.npts ** self.n} points, exceeding the "
                f"memory budget of {self.max_points}"
            )

    @property
    def h(self) -> float:
        """Physical lattice spacing 2L/N."""
        return 2.0 * self.half_width / self.npts

    @property
    def h_xi(self) -> float:
        """Frequency lattice spacing pi/L."""
        return np.pi / self.half_width

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def cell_volume_xi(self) -> float:
        return self.h_xi ** self.n

    @property
    def shape(self) -> tuple:
        return (self.npts,) * self.n

    @property
    def size(self) -> int:
        return self.npts ** self.n

    @property
    def nyquist_radius(self) -> float:
        """Largest per-axis |xi| on the lattice, (pi/L)*(N/2)."""
        return self.h_xi * self.npts / 2

    def axis_coords(self) -> np.ndarray:
        """1D physical coordinates -L + j*h, j = 0..N-1."""
        return -self.half_width + self.h * np.arange(self.npts)

    def axis_freqs(self) -> np.ndarray:
        """1D frequency coordinates in FFT ordering."""
        return self.h_xi * np.fft.fftfreq(self.npts, d=1.0 / self.npts)

    def coords(self) -> np.ndarray:
        """Physical coordinates, shape (n,) + grid shape."""
        return _coords(self)

    def freqs(self) -> np.ndarray:
        """Frequency coordinates in FFT ordering, shape (n,) + grid shape."""
        return _freqs(self)

    def radii(self, regularize_origin: bool = False) -> np.ndarray:
        """|x| on the grid.  With regularize_origin, the origin cell is set to
        the radius of the ball with the same volume as one cell (keeps singular
        radial weights finite and refinement-stable)."""
        r = np.sqrt(np.sum(self.coords() ** 2, axis=0))
        if regularize_origin:
            r = np.where(r == 0.0, self.origin_cell_radius(), r)
        return r

    def xi_radii(self) -> np.ndarray:
        """|xi| on the frequency lattice (FFT ordering)."""
        return np.sqrt(np.sum(self.freqs() ** 2, axis=0))

    def origin_cell_radius(self) -> float:
        """Radius of the n-ball whose volume equals one grid cell."""
        return self.h * (1.0 / unit_ball_volume(self.n)) ** (1.0 / self.n)


def unit_ball_volume(n: int) -> float:
    from scipy.special import gamma

    return np.pi ** (n / 2) / gamma(n / 2 + 1)


def sphere_area(n: int, radius: float) -> float:
    """Surface area of the sphere |x| = radius in R^n."""
    return n * unit_ball_volume(n) * radius ** (n - 1)


@lru_cache(maxsize=32)
def _coords(grid: GridSpec) -> np.ndarray:
    axes = [grid.axis_coords()] * grid.n
    out = np.stack(np.meshgrid(*axes, indexing="ij"))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def _freqs(grid: GridSpec) -> np.ndarray:
    axes = [grid.axis_freqs()] * grid.n
    out = np.stack(np.meshgrid(*axes, indexing="ij"))
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def _center_phase(grid: GridSpec) -> np.ndarray:
    """(-1)^(k_1+...+k_n) on the lattice: accounts for the physical origin
    sitting at index N/2 rather than 0."""
    k = np.fft.fftfreq(grid.npts, d=1.0 / grid.npts).astype(np.int64)
    sign1d = np.where(k % 2 == 0, 1.0, -1.0)
    out = sign1d
    for _ in range(grid.n - 1):
        out = np.multiply.outer(out, sign1d)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Field:
    """Complex-valued function on a GridSpec, in physical or frequency
    representation.  Values are immutable after construction."""

    grid: GridSpec
    values: np.ndarray
    rep: str = PHYSICAL

    def __post_init__(self):
        if self.rep not in (PHYSICAL, FREQUENCY):
            raise RepresentationError(f"unknown representation {self.rep!r}")
        vals = np.ascontiguousarray(self.values, dtype=np.complex128)
        if vals.shape != self.grid.shape:
            if vals.size != self.grid.size:
                raise ValueError(
                    f"values size {vals.size} does not match grid size {self.grid.size}"
                )
            vals = vals.reshape(self.grid.shape)
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def require(self, rep: str) -> None:
        if self.rep != rep:
            raise RepresentationError(f"expected a {rep} field, got {self.rep}")

    def norm2(self) -> float:
        """Discrete L^2 norm; valid in either representation (Parseval)."""
        w = self.grid.cell_volume if self.rep == PHYSICAL else self.grid.cell_volume_xi
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def inner(self, other: "Field") -> complex:
        """<f, g> = integral f conj(g); both fields must share representation."""
        if self.rep != other.rep or self.grid != other.grid:
            raise ValueError("inner product requires matching grid and representation")
        w = self.grid.cell_volume if self.rep == PHYSICAL else self.grid.cell_volume_xi
        return complex(np.sum(self.values * np.conj(other.values)) * w)


def field_from_function(grid: GridSpec, fn: Callable, rep: str = PHYSICAL) -> Field:
    """Sample a callable fn(x) with x of shape (n,) + grid shape."""
    pts = grid.coords() if rep == PHYSICAL else grid.freqs()
    return Field(grid, np.asarray(fn(pts), dtype=np.complex128), rep)


def forward_transform(f: Field) -> Field:
    """Unitary DFT, physical -> frequency."""
    f.require(PHYSICAL)
    g = f.grid
    scale = g.cell_volume / (2.0 * np.pi) ** (g.n / 2)
    vals = scale * _center_phase(g) * np.fft.fftn(f.values)
    return Field(g, vals, FREQUENCY)


def inverse_transform(f: Field) -> Field:
    """Exact inverse of forward_transform, frequency -> physical."""
    f.require(FREQUENCY)
    g = f.grid
    scale = g.cell_volume_xi * g.size / (2.0 * np.pi) ** (g.n / 2)
    vals = scale * np.fft.ifftn(_center_phase(g) * f.values)
    return Field(g, vals, PHYSICAL)


def evaluate_symbol(grid: GridSpec, sigma: Callable, zero_mode: Union[float, complex, None] = None) -> np.ndarray:
    """Evaluate a symbol xi -> complex on the frequency lattice.

    sigma receives the (n,)+shape frequency array.  A non-finite value at the
    zero mode is replaced by `zero_mode` (default 0, the declared rule for
    negative-order multipliers); non-finite values elsewhere are an error.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(sigma(grid.freqs()), dtype=np.complex128)
    if vals.shape != grid.shape:
        vals = np.broadcast_to(vals, grid.shape).copy()
    else:
        vals = vals.copy()
    zero_idx = (0,) * grid.n
    if not np.isfinite(vals[zero_idx]):
        vals[zero_idx] = 0.0 if zero_mode is None else zero_mode
    elif zero_mode is not None:
        vals[zero_idx] = zero_mode
    if not np.all(np.isfinite(vals)):
        raise ValueError("symbol is non-finite at a nonzero lattice point")
    return vals


def radial_symbol(fn: Callable) -> Callable:
    """Lift a function of |xi| to a symbol of xi."""

    def sigma(xi):
        return fn(np.sqrt(np.sum(xi ** 2, axis=0)))

    return sigma


def apply_multiplier(f: Field, sigma, zero_mode: Union[float, complex, None] = None) -> Field:
    """Fourier multiplier: inverse(sigma(xi) * forward(f)); preserves the
    representation tag of the input.

    sigma may be a callable of the frequency array or a precomputed lattice
    array in FFT ordering.
    """
    g = f.grid
    if callable(sigma):
        mult = evaluate_symbol(g, sigma, zero_mode)
    else:
        mult = np.asarray(sigma, dtype=np.complex128).reshape(g.shape)
    if f.rep == FREQUENCY:
        return Field(g, mult * f.values, FREQUENCY)
    fhat = forward_transform(f)
    return inverse_transform(Field(g, mult * fhat.values, FREQUENCY))


def norm_lp(f: Field, p: float) -> float:
    """Discrete L^p norm (sum |f|^p h^n)^(1/p); max norm for p = inf."""
    f.require(PHYSICAL)
    if p < 1:
        raise ValueError(f"L^p norm requires p >= 1, got p={p}")
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * f.grid.cell_volume) ** (1.0 / p))


def weight_abs_power(grid: GridSpec, exponent: float) -> np.ndarray:
    """|x|^exponent on the grid; the origin cell uses the volume-equivalent
    cell-averaged radius so negative exponents stay finite."""
    return grid.radii(regularize_origin=True) ** exponent


def weight_bracket_power(grid: GridSpec, exponent: float) -> np.ndarray:
    """<x>^exponent = (1+|x|^2)^(exponent/2) on the grid."""
    return (1.0 + grid.radii() ** 2) ** (exponent / 2.0)


def weighted_l2_norm(f: Field, weight) -> float:
    """||weight * f||_2 with cell-volume weighting; weight is a callable of x
    or a precomputed nonnegative array."""
    f.require(PHYSICAL)
    if callable(weight):
        w = np.asarray(weight(f.grid.coords()), dtype=np.float64)
    else:
        w = np.asarray(weight, dtype=np.float64).reshape(f.grid.shape)
    if not np.all(np.isfinite(w)):
        raise ValueError("weight must be finite on the grid (regularize the origin cell)")
    if np.any(w < 0):
        raise ValueError("weight must be nonnegative")
    return float(np.sqrt(np.sum(w ** 2 * np.abs(f.values) ** 2) * f.grid.cell_volume))


def boundary_decay(f: Field) -> float:
    """Largest |f| on the faces of the box, relative to max |f|; probe runners
    reject inputs whose boundary decay exceeds their periodization budget."""
    f.require(PHYSICAL)
    a = np.abs(f.values)
    peak = a.max()
    if peak == 0:
        return 0.0
    worst = 0.0
    for ax in range(f.grid.n):
        face = np.take(a, 0, axis=ax)
        worst = max(worst, float(face.max()))
    return worst / peak


# Flat binary serialization: magic, n, N, L, tag byte, then interleaved
# re/im float64 payload in row-major order.

_MAGIC = b"PHLF"


def write_field(f: Field, fh: BinaryIO) -> None:
    fh.write(_MAGIC)
    fh.write(struct.pack("<iidB", f.grid.n, f.grid.npts, f.grid.half_width,
                         0 if f.rep == PHYSICAL else 1))
    inter = np.empty(f.grid.size * 2, dtype=np.float64)
    flat = f.flat
    inter[0::2] = flat.real
    inter[1::2] = flat.imag
    fh.write(inter.tobytes())


def read_field(fh: BinaryIO) -> Field:
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError("not a field binary (bad magic)")
    n, npts, half_width, tag = struct.unpack("<iidB", fh.read(struct.calcsize("<iidB")))
    grid = GridSpec(n=n, npts=npts, half_width=half_width)
    inter = np.frombuffer(fh.read(grid.size * 16), dtype=np.float64)
    vals = inter[0::2] + 1j * inter[1::2]
    return Field(grid, vals, PHYSICAL if tag == 0 else FREQUENCY)
