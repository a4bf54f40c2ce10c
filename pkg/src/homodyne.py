"""
Heralded Fock Tomography – Homodyne Module

Quadrature probability densities, Monte Carlo generation of homodyne records
(loss, electronic noise and digitizer included), and histogram analysis of
the resulting marginals.

Convention: x = (a + a†)/√2, vacuum variance 1/2, ψ_0(x) = π^(−1/4) e^(−x²/2).
The quadrature measured at LO phase θ is x cos θ + p sin θ, whose eigenstates
have ⟨n|x_θ⟩ = e^(inθ) ψ_n(x).
"""
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import stats
from scipy.integrate import cumulative_trapezoid

import config
from src.errors import DimensionError, ParameterError, SamplingRangeError
from src.fock import DensityMatrix, apply_loss, fock_state
from src.utils import block_rng, derive_seed

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


# ── Domain types ──────────────────────────────────────────────────────────────

class QuadratureRecord(BaseModel):
    """One homodyne sample."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    x: float = Field(description="Quadrature value (vacuum variance 1/2)")
    theta: float = Field(ge=0.0, lt=TWO_PI, description="LO phase in radians")
    herald_clicks: int = Field(alias="clicks", ge=0, description="Herald click count")
    pulse_index: int = Field(alias="pulse", ge=0, description="Index of the pulse in the train")

    @field_validator("x")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("quadrature value must be finite")
        return value


class BhdModel(BaseModel):
    """Balanced homodyne detector with additive noise and a uniform digitizer."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta_bhd: float = Field(default=config.ETA_BHD, ge=0.0, le=1.0, description="Detector efficiency")
    elec_noise_sigma: float = Field(
        default=config.ELEC_NOISE_SIGMA, ge=0.0, description="Electronic noise std (quadrature units)"
    )
    adc_bits: int = Field(default=config.ADC_BITS, ge=0, description="Digitizer bits, 0 disables quantization")
    full_scale: float = Field(default=config.ADC_FULL_SCALE, description="Digitizer half-range")

    @model_validator(mode="after")
    def _check_full_scale(self) -> "BhdModel":
        if self.adc_bits > 0 and not self.full_scale > 0.0:
            raise ValueError("full_scale must be positive when the digitizer is enabled")
        return self

    @classmethod
    def ideal(cls) -> "BhdModel":
        """Unit efficiency, no noise, no quantization."""
        return cls(eta_bhd=1.0, elec_noise_sigma=0.0, adc_bits=0)


class PhasePolicy(BaseModel):
    """LO phase per pulse: one fixed phase, or uniformly random."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: Literal["fixed", "uniform"] = "uniform"
    theta: float = Field(default=0.0, description="Phase used in fixed mode")

    @classmethod
    def fixed(cls, theta: float) -> "PhasePolicy":
        return cls(mode="fixed", theta=theta)

    @classmethod
    def uniform(cls) -> "PhasePolicy":
        return cls(mode="uniform")


@dataclass(frozen=True, eq=False)
class QuadratureDataset:
    """
    Column store of quadrature records, ordered by pulse index.

    Behaves as a read-only sequence of QuadratureRecord.
    """

    x: np.ndarray
    theta: np.ndarray
    clicks: np.ndarray
    pulse: np.ndarray

    def __post_init__(self) -> None:
        columns = {
            "x": np.array(self.x, dtype=np.float64, copy=True),
            "theta": np.array(self.theta, dtype=np.float64, copy=True),
            "clicks": np.array(self.clicks, dtype=np.int64, copy=True),
            "pulse": np.array(self.pulse, dtype=np.int64, copy=True),
        }
        sizes = {column.shape for column in columns.values()}
        if len(sizes) != 1 or columns["x"].ndim != 1:
            raise DimensionError("record columns must be 1-D and of equal length")
        if not np.all(np.isfinite(columns["x"])):
            raise ParameterError("quadrature values must be finite")
        for name, column in columns.items():
            column.setflags(write=False)
            object.__setattr__(self, name, column)

    def __len__(self) -> int:
        return self.x.size

    def __getitem__(self, index: int) -> QuadratureRecord:
        return QuadratureRecord(
            x=float(self.x[index]),
            theta=float(self.theta[index]),
            clicks=int(self.clicks[index]),
            pulse=int(self.pulse[index]),
        )

    def __iter__(self) -> Iterator[QuadratureRecord]:
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_records(cls, records: Iterable[QuadratureRecord]) -> "QuadratureDataset":
        records = list(records)
        return cls(
            x=[r.x for r in records],
            theta=[r.theta for r in records],
            clicks=[r.herald_clicks for r in records],
            pulse=[r.pulse_index for r in records],
        )


RecordsLike = Union[QuadratureDataset, Sequence[QuadratureRecord]]


def as_dataset(records: RecordsLike) -> QuadratureDataset:
    if isinstance(records, QuadratureDataset):
        return records
    return QuadratureDataset.from_records(records)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts per quadrature bin with √N error bars."""

    bin_edges: np.ndarray
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(self.counts.astype(np.float64))

    @property
    def total(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def density(self) -> np.ndarray:
        """Counts normalized to a probability density over all samples."""
        return self.counts / (self.total * np.diff(self.bin_edges))


# ── Wavefunctions and densities ───────────────────────────────────────────────

def eigenfunctions(n_max: int, x) -> np.ndarray:
    """
    ψ_0 … ψ_{n_max} at the points *x*, shape (n_max + 1, *x.shape).

    Upward recurrence on the normalized functions:
    ψ_{k+1} = √(2/(k+1)) x ψ_k − √(k/(k+1)) ψ_{k−1}.
    """
    if n_max < 0:
        raise DimensionError(f"n_max must be non-negative, got {n_max}")
    x = np.asarray(x, dtype=np.float64)
    table = np.empty((n_max + 1,) + x.shape, dtype=np.float64)
    table[0] = math.pi ** -0.25 * np.exp(-0.5 * x ** 2)
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * x * table[0]
    for k in range(1, n_max):
        table[k + 1] = math.sqrt(2.0 / (k + 1)) * x * table[k] - math.sqrt(k / (k + 1)) * table[k - 1]
    return table


def eigenfunction(n: int, x) -> np.ndarray:
    """ψ_n(x) = H_n(x) e^(−x²/2) / √(2ⁿ n! √π)."""
    if n < 0:
        raise DimensionError(f"photon number must be non-negative, got {n}")
    return eigenfunctions(n, x)[n]


def _phase_vectors(dim: int, x, theta) -> np.ndarray:
    """Columns ⟨n|x_θ⟩ = e^(inθ) ψ_n(x), shape (dim, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    theta = np.broadcast_to(np.asarray(theta, dtype=np.float64), x.shape)
    psi = eigenfunctions(dim - 1, x)
    return psi * np.exp(1j * np.arange(dim)[:, None] * theta[None, :])


def quadrature_pdf(rho: DensityMatrix, theta, x) -> np.ndarray:
    """
    pr(x|θ) = Σ_mn ρ_mn e^(i(n−m)θ) ψ_m(x) ψ_n(x).

    *theta* is a scalar or an array matching *x*. Returns an array shaped
    like *x* (a 0-d array for scalar input).
    """
    shape = np.shape(x)
    vectors = _phase_vectors(rho.dim, x, theta)
    values = np.einsum("mj,mn,nj->j", vectors.conj(), rho.entries, vectors).real
    return values.reshape(shape)


def predicted_marginal(n: int, eta: float, grid) -> np.ndarray:
    """Marginal of |n⟩ after loss *eta*; phase-independent."""
    if n < 0:
        raise DimensionError(f"photon number must be non-negative, got {n}")
    return quadrature_pdf(apply_loss(fock_state(n, n + 1), eta), 0.0, np.asarray(grid, dtype=np.float64))


def sampling_range(dim: int) -> float:
    return 6.0 + 2.0 * math.sqrt(dim)


# ── Inverse-CDF sampling ──────────────────────────────────────────────────────

class QuadratureSampler:
    """
    Tabulated inverse CDFs of a state's quadrature distributions.

    Tables are built lazily per LO phase on a fixed grid over
    ±(6 + 2√dim); a state whose distribution leaves that range by more than
    the tail tolerance is rejected.
    """

    def __init__(self, rho: DensityMatrix, grid_points: int = config.SAMPLING_GRID_POINTS) -> None:
        self.rho = rho
        self.extent = sampling_range(rho.dim)
        self.grid = np.linspace(-self.extent, self.extent, grid_points)
        self.phase_invariant = rho.is_diagonal()
        psi = eigenfunctions(rho.dim - 1, self.grid)
        # Diagonal bands G_d(x) = Σ_{n−m=d} ρ_mn ψ_m ψ_n, d ≥ 0
        self._bands = [
            np.einsum("m,mj,mj->j", np.diagonal(rho.entries, offset=d), psi[: rho.dim - d], psi[d:])
            for d in range(rho.dim)
        ]
        self._tables: dict = {}
        self._lock = threading.Lock()

    def pdf_on_grid(self, theta: float) -> np.ndarray:
        pdf = self._bands[0].real.copy()
        for d in range(1, len(self._bands)):
            pdf += 2.0 * (np.exp(1j * d * theta) * self._bands[d]).real
        return pdf

    def cdf_table(self, theta: float) -> np.ndarray:
        key = 0.0 if self.phase_invariant else float(theta)
        with self._lock:
            table = self._tables.get(key)
        if table is not None:
            return table
        pdf = np.clip(self.pdf_on_grid(key), 0.0, None)
        cdf = cumulative_trapezoid(pdf, self.grid, initial=0.0)
        total = cdf[-1]
        if abs(1.0 - total) > config.SAMPLING_TAIL_TOL:
            raise SamplingRangeError(
                f"quadrature distribution holds probability {total:.8f} inside ±{self.extent:.2f}"
            )
        table = np.maximum.accumulate(cdf / total)
        with self._lock:
            self._tables[key] = table
        return table

    def invert(self, u: np.ndarray, theta: float) -> np.ndarray:
        return np.interp(u, self.cdf_table(theta), self.grid)


def quadrature_cdf(rho: DensityMatrix, theta: float, points) -> np.ndarray:
    """CDF of pr(x|θ) at *points*, from the sampling table."""
    sampler = QuadratureSampler(rho)
    return np.interp(np.asarray(points, dtype=np.float64), sampler.grid, sampler.cdf_table(theta), left=0.0, right=1.0)


def quantize(x: np.ndarray, bhd: BhdModel) -> np.ndarray:
    """
    Uniform mid-level digitizer with 2^adc_bits levels over ±full_scale.

    Values beyond full scale clip to the outermost level.
    """
    if bhd.adc_bits == 0:
        return np.asarray(x, dtype=np.float64)
    levels = 2 ** bhd.adc_bits
    step = 2.0 * bhd.full_scale / levels
    codes = np.clip(np.floor((np.asarray(x) + bhd.full_scale) / step), 0, levels - 1)
    return -bhd.full_scale + (codes + 0.5) * step


def sample_quadratures(
    rho: DensityMatrix,
    n_samples: int,
    phase_policy: Optional[PhasePolicy],
    bhd: BhdModel,
    seed: int,
    herald_clicks: int = 0,
    herald_probability: Optional[float] = None,
    workers: int = config.DEFAULT_WORKERS,
) -> QuadratureDataset:
    """
    Draws i.i.d. homodyne records of *rho* seen through *bhd*.

    The state passes the detector loss, each sample is drawn exactly from
    pr(x|θ) at its recorded phase, then electronic noise and the digitizer
    act. Samples are produced in fixed-size blocks, each with its own
    generator derived from (seed, block); the output is identical for any
    number of workers.

    With *herald_probability* the pulse indices follow geometric gaps
    between heralds; otherwise they count the records.
    """
    if n_samples <= 0:
        raise ParameterError(f"sample count must be positive, got {n_samples}")
    policy = phase_policy or PhasePolicy.uniform()
    sampler = QuadratureSampler(apply_loss(rho, bhd.eta_bhd))
    block_size = config.SAMPLING_BLOCK_SIZE
    n_blocks = -(-n_samples // block_size)
    stream_seed = derive_seed(seed, "quadratures")
    fixed_theta = policy.theta % TWO_PI

    def _block(block: int) -> tuple[np.ndarray, np.ndarray]:
        size = min(block_size, n_samples - block * block_size)
        rng = block_rng(stream_seed, block)
        u = rng.random(size)
        if policy.mode == "uniform":
            steps = rng.integers(0, config.PHASE_STEPS, size)
            theta = steps * (TWO_PI / config.PHASE_STEPS)
        else:
            steps = np.zeros(size, dtype=np.int64)
            theta = np.full(size, fixed_theta)
        x = np.empty(size, dtype=np.float64)
        if sampler.phase_invariant:
            x[:] = sampler.invert(u, 0.0)
        else:
            for step in np.unique(steps):
                mask = steps == step
                x[mask] = sampler.invert(u[mask], float(theta[mask][0]))
        if bhd.elec_noise_sigma > 0.0:
            x += rng.normal(0.0, bhd.elec_noise_sigma, size)
        logger.debug("Sampling block %d: %d records", block, size)
        return x, theta

    with ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="sampler") as executor:
        blocks = list(executor.map(_block, range(n_blocks)))

    x = np.concatenate([b[0] for b in blocks])
    theta = np.concatenate([b[1] for b in blocks])
    if bhd.adc_bits > 0:
        clipped = int(np.count_nonzero(np.abs(x) > bhd.full_scale))
        if clipped:
            logger.warning("%d sample(s) beyond digitizer full scale ±%.2f were clipped", clipped, bhd.full_scale)
        x = quantize(x, bhd)

    if herald_probability is not None and herald_probability > 0.0:
        gaps = np.random.default_rng(derive_seed(seed, "pulse-gaps")).geometric(
            min(1.0, herald_probability), n_samples
        )
        pulse = np.cumsum(gaps) - 1
    else:
        pulse = np.arange(n_samples)
    return QuadratureDataset(x=x, theta=theta, clicks=np.full(n_samples, herald_clicks), pulse=pulse)


# ── Histograms ────────────────────────────────────────────────────────────────

def _quadrature_values(records) -> np.ndarray:
    if isinstance(records, QuadratureDataset):
        return np.asarray(records.x)
    if isinstance(records, np.ndarray):
        return records.astype(np.float64)
    return np.array([r.x for r in records], dtype=np.float64)


def marginal_histogram(records, bin_edges) -> Histogram:
    """
    Counts of quadrature values per bin; samples outside the edges are
    reported as underflow/overflow rather than dropped silently.
    """
    edges = np.array(bin_edges, dtype=np.float64, copy=True)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0.0):
        raise ParameterError("bin edges must be a strictly increasing sequence of at least two values")
    values = _quadrature_values(records)
    if values.size == 0:
        raise ParameterError("cannot histogram an empty record set")
    counts, _ = np.histogram(values, bins=edges)
    edges.setflags(write=False)
    return Histogram(
        bin_edges=edges,
        counts=counts.astype(np.int64),
        underflow=int(np.count_nonzero(values < edges[0])),
        overflow=int(np.count_nonzero(values > edges[-1])),
    )


def chi_square_against(hist: Histogram, cdf: Callable[[np.ndarray], np.ndarray], min_expected: float = 5.0):
    """
    Pearson χ² of *hist* against a model CDF.

    Underflow and overflow are treated as two extra bins; adjacent bins are
    merged until every expected count reaches *min_expected*.

    Returns:
        (statistic, p_value, degrees_of_freedom)
    """
    edge_cdf = np.asarray(cdf(hist.bin_edges), dtype=np.float64)
    probs = np.concatenate(([edge_cdf[0]], np.diff(edge_cdf), [1.0 - edge_cdf[-1]]))
    observed = np.concatenate(([hist.underflow], hist.counts, [hist.overflow])).astype(np.float64)
    expected = np.clip(probs, 0.0, None) * hist.total

    merged_obs, merged_exp = [], []
    acc_obs = acc_exp = 0.0
    for obs, exp in zip(observed, expected):
        acc_obs += obs
        acc_exp += exp
        if acc_exp >= min_expected:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if merged_exp:
        merged_obs[-1] += acc_obs
        merged_exp[-1] += acc_exp
    merged_obs = np.asarray(merged_obs)
    merged_exp = np.asarray(merged_exp)
    merged_exp *= merged_obs.sum() / merged_exp.sum()
    result = stats.chisquare(merged_obs, merged_exp)
    return float(result.statistic), float(result.pvalue), merged_obs.size - 1
