"""
Heralded Fock Tomography – Spectral Module

Schmidt analysis of joint spectral intensities, overlap of measured spectra
and the efficiency budget of the homodyne measurement. A flat spectral phase
is assumed throughout: amplitudes are square roots of intensities.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

import config
from src.errors import DimensionError, ParameterError
from src.utils import require_unit_interval

logger = logging.getLogger(__name__)


# ── Domain types ──────────────────────────────────────────────────────────────

def _monotone_axis(name: str, axis) -> np.ndarray:
    axis = np.array(axis, dtype=np.float64, copy=True)
    if axis.ndim != 1 or axis.size < 2:
        raise DimensionError(f"{name} needs at least two points")
    if not np.all(np.diff(axis) > 0.0):
        raise ParameterError(f"{name} must be strictly increasing")
    axis.setflags(write=False)
    return axis


@dataclass(frozen=True, eq=False)
class SpectralAmplitude:
    """Spectrum on a wavelength grid (nm); values are intensities in arbitrary units."""

    wavelengths: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        grid = _monotone_axis("wavelength grid", self.wavelengths)
        values = np.array(self.amplitudes, dtype=np.float64, copy=True)
        if values.shape != grid.shape:
            raise DimensionError("spectrum values and grid differ in length")
        if np.any(values < 0.0):
            raise ParameterError("spectral amplitudes must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "wavelengths", grid)
        object.__setattr__(self, "amplitudes", values)


@dataclass(frozen=True, eq=False)
class JointSpectrum:
    """Joint spectral intensity, rows along the signal axis, columns along the trigger axis."""

    signal_axis: np.ndarray
    trigger_axis: np.ndarray
    intensity: np.ndarray

    def __post_init__(self) -> None:
        signal = _monotone_axis("signal axis", self.signal_axis)
        trigger = _monotone_axis("trigger axis", self.trigger_axis)
        grid = np.array(self.intensity, dtype=np.float64, copy=True)
        if grid.shape != (signal.size, trigger.size):
            raise DimensionError(
                f"intensity grid has shape {grid.shape}, expected {(signal.size, trigger.size)}"
            )
        if np.any(grid < 0.0) or not np.all(np.isfinite(grid)):
            raise ParameterError("joint spectral intensity must be finite and non-negative")
        grid.setflags(write=False)
        object.__setattr__(self, "signal_axis", signal)
        object.__setattr__(self, "trigger_axis", trigger)
        object.__setattr__(self, "intensity", grid)

    def transposed(self) -> "JointSpectrum":
        return JointSpectrum(self.trigger_axis, self.signal_axis, self.intensity.T)


class SchmidtAnalysis(BaseModel):
    model_config = ConfigDict(frozen=True)

    purity: float = Field(description="Heralded-state spectral purity P = Σ μ_i²")
    schmidt_number: float = Field(description="K = 1 / P")
    coefficients: list[float] = Field(description="Schmidt weights μ_i, descending, summing to 1")


class HeraldingEfficiency(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    consistent: bool = Field(description="False when the computed efficiency exceeds 1")


class EfficiencyBudget(BaseModel):
    """The four factors of the overall homodyne efficiency."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta_bhd: float = Field(default=config.ETA_BHD, ge=0.0, le=1.0, description="Homodyne detector efficiency")
    eta_mm: float = Field(default=config.ETA_MM, ge=0.0, le=1.0, description="LO/signal mode matching")
    eta_p: float = Field(default=config.ETA_P, ge=0.0, le=1.0, description="Purity factor √P")
    eta_dc: float = Field(default=config.ETA_DC, ge=0.0, le=1.0, description="Dark-count false heralds")
    visibility: Optional[float] = Field(default=None, ge=0.0, le=1.0, description="Classical visibility V")

    @model_validator(mode="after")
    def _mode_match_from_visibility(self) -> "EfficiencyBudget":
        if self.visibility is not None and abs(self.eta_mm - self.visibility ** 2) > 1e-12:
            raise ValueError(
                f"eta_mm={self.eta_mm} inconsistent with visibility {self.visibility} (expected V²)"
            )
        return self

    @classmethod
    def from_visibility(cls, visibility: float, **factors) -> "EfficiencyBudget":
        return cls(eta_mm=visibility ** 2, visibility=visibility, **factors)

    @property
    def total(self) -> float:
        return efficiency_budget_total(self)


# ── Schmidt analysis ──────────────────────────────────────────────────────────

def _trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    steps = np.diff(axis)
    weights = np.zeros_like(axis)
    weights[:-1] += 0.5 * steps
    weights[1:] += 0.5 * steps
    return weights


def schmidt_purity(jsi: JointSpectrum) -> SchmidtAnalysis:
    """
    Purity and Schmidt number of the heralded photon from a measured JSI.

    The amplitude √I is weighted by trapezoid-rule axis weights so that
    non-uniform instrument grids give the continuum singular values.
    """
    amplitude = np.sqrt(jsi.intensity)
    if not np.any(amplitude > 0.0):
        raise ParameterError("joint spectral intensity is identically zero")
    row_w = np.sqrt(_trapezoid_weights(jsi.signal_axis))
    col_w = np.sqrt(_trapezoid_weights(jsi.trigger_axis))
    singular = np.linalg.svd(row_w[:, None] * amplitude * col_w[None, :], compute_uv=False)
    weights = singular ** 2
    mu = np.sort(weights / weights.sum())[::-1]
    purity = float(np.sum(mu ** 2))
    logger.debug("Schmidt analysis: P=%.6f over %d modes", purity, mu.size)
    return SchmidtAnalysis(purity=purity, schmidt_number=1.0 / purity, coefficients=mu.tolist())


# ── Spectral overlap ──────────────────────────────────────────────────────────

def spectral_overlap(a: SpectralAmplitude, b: SpectralAmplitude) -> float:
    """
    O = [∫√I_a √I_b dω]² / (∫I_a dω · ∫I_b dω).

    The numerator is integrated over the shared wavelength range on the union
    of both grids (linear interpolation); each normalization uses its own
    full grid. Disjoint supports give 0.
    """
    lo = max(a.wavelengths[0], b.wavelengths[0])
    hi = min(a.wavelengths[-1], b.wavelengths[-1])
    norm_a = trapezoid(a.amplitudes, a.wavelengths)
    norm_b = trapezoid(b.amplitudes, b.wavelengths)
    if hi <= lo or norm_a <= 0.0 or norm_b <= 0.0:
        return 0.0
    grid = np.union1d(a.wavelengths, b.wavelengths)
    grid = grid[(grid >= lo) & (grid <= hi)]
    if grid.size < 2:
        return 0.0
    field_a = np.sqrt(np.interp(grid, a.wavelengths, a.amplitudes))
    field_b = np.sqrt(np.interp(grid, b.wavelengths, b.amplitudes))
    overlap = trapezoid(field_a * field_b, grid) ** 2 / (norm_a * norm_b)
    return float(min(1.0, max(0.0, overlap)))


# ── Efficiency accounting ─────────────────────────────────────────────────────

def heralding_efficiency(r_coinc: float, r_trigger: float, eta_apd: float) -> HeraldingEfficiency:
    """η_he = R_C / (η_apd · R_trigger)."""
    if r_coinc < 0.0 or not r_trigger > 0.0:
        raise ParameterError("rates must be non-negative and the trigger rate positive")
    if not 0.0 < eta_apd <= 1.0:
        raise ParameterError(f"APD efficiency must lie in (0, 1], got {eta_apd}")
    value = r_coinc / (eta_apd * r_trigger)
    consistent = value <= 1.0
    if not consistent:
        logger.warning("Heralding efficiency %.3f exceeds 1: rates and APD efficiency disagree", value)
    return HeraldingEfficiency(value=value, consistent=consistent)


def mode_match_efficiency(
    visibility: Optional[float] = None,
    eta_he: Optional[float] = None,
    overlap: Optional[float] = None,
    override: Optional[float] = None,
) -> float:
    """
    η_mm from, in order of precedence: an explicit override, the visibility
    (V²), or the product of heralding efficiency and spectral overlap.
    """
    if override is not None:
        return require_unit_interval("eta_mm", override)
    if visibility is not None:
        return require_unit_interval("visibility", visibility) ** 2
    if eta_he is not None and overlap is not None:
        return require_unit_interval("eta_he", eta_he) * require_unit_interval("overlap", overlap)
    raise ParameterError("mode matching needs an override, a visibility, or eta_he with an overlap")


def purity_efficiency(purity: float) -> float:
    """η_p = √P."""
    return math.sqrt(require_unit_interval("purity", purity))


def efficiency_budget_total(budget: EfficiencyBudget) -> float:
    """η_est = η_bhd · η_mm · η_p · η_dc."""
    return budget.eta_bhd * budget.eta_mm * budget.eta_p * budget.eta_dc


# ── Synthetic spectra ─────────────────────────────────────────────────────────

def gaussian_spectrum(grid, center: float, fwhm: float) -> SpectralAmplitude:
    """Gaussian intensity spectrum with the given full width at half maximum."""
    grid = np.asarray(grid, dtype=np.float64)
    sigma = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    return SpectralAmplitude(grid, np.exp(-0.5 * ((grid - center) / sigma) ** 2))


def gaussian_jsi(
    signal_axis,
    trigger_axis,
    sigma_plus: float,
    sigma_minus: float,
    signal_center: float = 0.0,
    trigger_center: float = 0.0,
) -> JointSpectrum:
    """
    Pump-envelope × phase-matching model with Gaussian factors.

    The joint amplitude is exp(−(u+v)²/(2σ₊²) − (u−v)²/(2σ₋²)) with u, v the
    detunings from the centers; its analytic purity is 2σ₊σ₋/(σ₊² + σ₋²).
    """
    u = np.asarray(signal_axis, dtype=np.float64)[:, None] - signal_center
    v = np.asarray(trigger_axis, dtype=np.float64)[None, :] - trigger_center
    amplitude = np.exp(-((u + v) ** 2) / (2.0 * sigma_plus ** 2) - ((u - v) ** 2) / (2.0 * sigma_minus ** 2))
    return JointSpectrum(signal_axis, trigger_axis, amplitude ** 2)


def gaussian_jsi_purity(sigma_plus: float, sigma_minus: float) -> float:
    return 2.0 * sigma_plus * sigma_minus / (sigma_plus ** 2 + sigma_minus ** 2)
