"""
Heralded Fock Tomography – Wigner Module

Phase-space representation of density matrices from the closed-form Fock
kernels

    W_{|m⟩⟨n|}(x, p) = ((−1)ⁿ/π) √(2^(m−n) n!/m!) (x − ip)^(m−n) L_n^(m−n)(2r²) e^(−r²),  m ≥ n,

with r² = x² + p², W_vac(0, 0) = 1/π and ∫∫ W dx dp = 1. Kernels with
m < n are complex conjugates of the transposed ones.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre, gammaln

import config
from src.errors import ParameterError
from src.fock import DensityMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    """Wigner values on x_axis × p_axis; values[i, j] = W(x_i, p_j)."""

    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        for name in ("x_axis", "p_axis", "values"):
            array = np.array(getattr(self, name), dtype=np.float64, copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.values.shape != (self.x_axis.size, self.p_axis.size):
            raise ParameterError("Wigner grid shape does not match its axes")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("Wigner grid contains non-finite values")

    def integral(self) -> float:
        """Trapezoid-rule ∫∫ W dx dp over the grid."""
        return float(trapezoid(trapezoid(self.values, self.p_axis, axis=1), self.x_axis))

    def marginal(self) -> np.ndarray:
        """∫ W dp along each x (the θ = 0 quadrature marginal)."""
        return trapezoid(self.values, self.p_axis, axis=1)


def default_axis() -> np.ndarray:
    return np.linspace(-config.WIGNER_EXTENT, config.WIGNER_EXTENT, config.WIGNER_POINTS)


def _wigner_values(rho: DensityMatrix, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """W at matching arrays of points x, p."""
    r2 = x ** 2 + p ** 2
    envelope = np.exp(-r2) / math.pi
    z = x - 1j * p
    total = np.zeros(np.shape(r2), dtype=np.float64)
    for n in range(rho.dim):
        diag = rho.entries[n, n].real
        if diag != 0.0:
            total += diag * (-1) ** n * eval_genlaguerre(n, 0, 2.0 * r2)
        for m in range(n + 1, rho.dim):
            coeff = rho.entries[m, n]
            if coeff == 0.0:
                continue
            d = m - n
            norm = math.exp(0.5 * (d * math.log(2.0) + gammaln(n + 1) - gammaln(m + 1)))
            kernel = (-1) ** n * norm * z ** d * eval_genlaguerre(n, d, 2.0 * r2)
            # ρ_mn W_mn + ρ_nm W_nm = 2 Re(ρ_mn W_mn)
            total += 2.0 * (coeff * kernel).real
    return total * envelope


def wigner_point(rho: DensityMatrix, x: float, p: float) -> float:
    return float(_wigner_values(rho, np.asarray(float(x)), np.asarray(float(p))))


def wigner_origin(rho: DensityMatrix) -> float:
    """W(0, 0) = (1/π) Σ_n (−1)ⁿ ρ_nn."""
    signs = (-1.0) ** np.arange(rho.dim)
    return float(signs @ np.diag(rho.entries).real / math.pi)


def wigner_grid(
    rho: DensityMatrix,
    x_axis: Optional[np.ndarray] = None,
    p_axis: Optional[np.ndarray] = None,
    workers: int = config.DEFAULT_WORKERS,
) -> PhaseSpaceGrid:
    """Wigner function on a rectangular grid, one row of x per task."""
    x_axis = default_axis() if x_axis is None else np.asarray(x_axis, dtype=np.float64)
    p_axis = default_axis() if p_axis is None else np.asarray(p_axis, dtype=np.float64)

    def _row(x: float) -> np.ndarray:
        return _wigner_values(rho, np.full(p_axis.shape, x), p_axis)

    with ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="wigner") as executor:
        rows = list(executor.map(_row, x_axis))
    logger.debug("Wigner grid: %d×%d points, dim=%d", x_axis.size, p_axis.size, rho.dim)
    return PhaseSpaceGrid(x_axis=x_axis, p_axis=p_axis, values=np.vstack(rows))


def wigner_cross_section(
    rho: DensityMatrix,
    axis: Literal["P=0", "X=0"],
    grid=None,
) -> np.ndarray:
    """W(x, 0) for axis "P=0", W(0, p) for axis "X=0"."""
    grid = default_axis() if grid is None else np.asarray(grid, dtype=np.float64)
    zeros = np.zeros_like(grid)
    if axis == "P=0":
        return _wigner_values(rho, grid, zeros)
    if axis == "X=0":
        return _wigner_values(rho, zeros, grid)
    raise ParameterError(f"cross-section axis must be 'P=0' or 'X=0', got {axis!r}")


def grid_integral(grid: PhaseSpaceGrid) -> float:
    return grid.integral()


def marginal_from_grid(grid: PhaseSpaceGrid) -> np.ndarray:
    """p-integrated Wigner function; matches quadrature_pdf(ρ, 0, x_axis)."""
    return grid.marginal()
