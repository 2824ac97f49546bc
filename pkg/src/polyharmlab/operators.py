"""Matrix-free operator-norm estimation by power iteration on A* A.

Operator norms on weighted spaces are never assembled: the factors (pointwise
weights, Fourier multipliers, dense Birman-Schwinger solves) are applied as
callables on flat complex vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class PowerIterationError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass
class NormEstimate:
    norm: float
    iterations: int
    residual: float
    converged: bool
    vector: Optional[np.ndarray] = None  # final iterate, usable as warm start


def operator_norm(
    apply_a: Callable[[np.ndarray], np.ndarray],
    apply_a_adjoint: Callable[[np.ndarray], np.ndarray],
    size: int,
    rng: Optional[np.random.Generator] = None,
    max_iter: int = 50,
    rtol: float = 1e-6,
    start: Optional[np.ndarray] = None,
) -> NormEstimate:
    """Largest singular value of A via power iteration on A* A.

    Stops after max_iter iterations or when the Rayleigh quotient stagnates to
    relative tolerance rtol, whichever comes first.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if start is not None:
        v = np.asarray(start, dtype=np.complex128).reshape(-1).copy()
    else:
        v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    nv = np.linalg.norm(v)
    if nv == 0:
        raise ValueError("zero start vector")
    v /= nv
    rho_prev = None
    rho = 0.0
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        w = apply_a_adjoint(apply_a(v))
        rho = float(np.real(np.vdot(v, w)))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return NormEstimate(0.0, it, 0.0, True, v)
        residual = float(np.linalg.norm(w - rho * v) / nw)
        if rho_prev is not None and abs(rho - rho_prev) <= rtol * max(abs(rho), 1e-300):
            v = w / nw
            rho_prev = rho
            break
        rho_prev = rho
        v = w / nw
    converged = residual < np.sqrt(rtol) or (
        rho_prev is not None and it < max_iter
    )
    return NormEstimate(float(np.sqrt(max(rho, 0.0))), it, residual, converged, v)
