"""
Heralded Fock Tomography – Fock Space Module

Truncated Fock-space state algebra: density matrices, the binomial loss
channel, photon-number statistics and the fidelity between two states.

Every DensityMatrix is Hermitian, positive semidefinite and of unit trace;
the constructor enforces this and stores a read-only copy of the entries.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

import config
from src.errors import DataFormatError, DimensionError, NotPositiveError, ParameterError
from src.utils import require_unit_interval

logger = logging.getLogger(__name__)


# ── Domain types ──────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    State of one field mode in the Fock basis |0⟩ … |dim−1⟩.

    Attributes:
        entries: dim×dim complex matrix, ρ_mn = ⟨m|ρ|n⟩.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.entries, dtype=np.complex128, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
            raise DimensionError(f"density matrix must be square and non-empty, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ParameterError("density matrix contains non-finite entries")

        asymmetry = float(np.max(np.abs(matrix - matrix.conj().T)))
        if asymmetry > config.HERMITIAN_TOL:
            raise ParameterError(f"density matrix is not Hermitian (max deviation {asymmetry:.3e})")
        matrix = 0.5 * (matrix + matrix.conj().T)

        trace = float(np.trace(matrix).real)
        if abs(trace - 1.0) > config.TRACE_TOL:
            raise ParameterError(f"density matrix trace is {trace!r}, expected 1")

        smallest = float(np.linalg.eigvalsh(matrix)[0])
        if smallest < -config.PSD_TOL:
            raise NotPositiveError(f"density matrix has eigenvalue {smallest:.3e}")

        matrix.setflags(write=False)
        object.__setattr__(self, "entries", matrix)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_diagonal(self, atol: float = 1e-14) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.max(np.abs(off)) <= atol)

    # ── Serialization ─────────────────────────────────────────────────────────

    def to_json_dict(self) -> dict:
        """Row-major {"dim", "entries": [[[re, im], …], …]} representation."""
        return {
            "dim": self.dim,
            "entries": [
                [[float(z.real), float(z.imag)] for z in row] for row in self.entries
            ],
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "DensityMatrix":
        try:
            dim = int(payload["dim"])
            raw = np.asarray(payload["entries"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed density-matrix document: {exc}") from exc
        if raw.shape != (dim, dim, 2):
            raise DataFormatError(
                f"density-matrix entries have shape {raw.shape}, expected ({dim}, {dim}, 2)"
            )
        return cls(raw[..., 0] + 1j * raw[..., 1])


@dataclass(frozen=True, eq=False)
class PhotonDistribution:
    """Photon-number probabilities P(n), n = 0 … dim−1."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=np.float64, copy=True)
        if probs.ndim != 1 or probs.size == 0:
            raise DimensionError("photon distribution must be a non-empty vector")
        if np.any(probs < -config.PSD_TOL) or np.any(probs > 1.0 + config.PSD_TOL):
            raise ParameterError("photon probabilities must lie in [0, 1]")
        probs = np.clip(probs, 0.0, 1.0)
        if abs(probs.sum() - 1.0) > config.TRACE_TOL:
            raise ParameterError(f"photon probabilities sum to {probs.sum()!r}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n])

    def __len__(self) -> int:
        return self.probs.size

    def tail(self, n: int) -> float:
        """P(photon number ≥ n)."""
        return float(self.probs[n:].sum())


# ── Constructors ──────────────────────────────────────────────────────────────

def fock_state(n: int, dim: int) -> DensityMatrix:
    """Projector |n⟩⟨n| in a space truncated at *dim* levels."""
    if dim < 1:
        raise DimensionError(f"dimension must be positive, got {dim}")
    if not 0 <= n < dim:
        raise DimensionError(f"Fock index {n} outside truncation 0…{dim - 1}")
    entries = np.zeros((dim, dim), dtype=np.complex128)
    entries[n, n] = 1.0
    return DensityMatrix(entries)


def diagonal_state(probs) -> DensityMatrix:
    """Incoherent mixture Σ_n probs[n] |n⟩⟨n|."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise DimensionError("diagonal state needs a non-empty probability vector")
    return DensityMatrix(np.diag(probs).astype(np.complex128))


def normalize(matrix: np.ndarray) -> DensityMatrix:
    """Scales a Hermitian PSD matrix to unit trace."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    trace = float(np.trace(matrix).real)
    if not trace > 0.0:
        raise NotPositiveError(f"cannot normalize a matrix with trace {trace!r}")
    return DensityMatrix(matrix / trace)


def repair_psd(matrix: np.ndarray, tol: float = config.PSD_TOL) -> DensityMatrix:
    """
    Projects a nearly-valid matrix onto the set of density matrices.

    The matrix is made exactly Hermitian, eigenvalues in [−tol, 0) are
    clamped to zero and the result is renormalized. More negative
    eigenvalues signal a bug rather than rounding and raise NotPositiveError.
    """
    matrix = np.asarray(matrix, dtype=np.complex128)
    hermitian = 0.5 * (matrix + matrix.conj().T)
    trace = float(np.trace(hermitian).real)
    if not trace > 0.0:
        raise NotPositiveError(f"cannot repair a matrix with trace {trace!r}")
    hermitian = hermitian / trace
    values, vectors = np.linalg.eigh(hermitian)
    if values[0] < -tol:
        raise NotPositiveError(f"eigenvalue {values[0]:.3e} below repair tolerance {tol:.1e}")
    if values[0] < 0.0:
        values = np.clip(values, 0.0, None)
        hermitian = (vectors * values) @ vectors.conj().T
    return normalize(hermitian)


def resize(rho: DensityMatrix, dim: int) -> DensityMatrix:
    """
    Embeds *rho* in a space of *dim* levels.

    Padding adds empty levels. Truncation is allowed only when the weight
    above the cut is below the trace tolerance.
    """
    if dim == rho.dim:
        return rho
    if dim > rho.dim:
        padded = np.zeros((dim, dim), dtype=np.complex128)
        padded[: rho.dim, : rho.dim] = rho.entries
        return DensityMatrix(padded)
    dropped = float(np.trace(rho.entries[dim:, dim:]).real)
    if dropped > config.TRACE_TOL:
        raise DimensionError(f"truncating to {dim} levels would drop weight {dropped:.3e}")
    return normalize(rho.entries[:dim, :dim])


# ── Loss channel ──────────────────────────────────────────────────────────────

class LossChannel:
    """
    Beam-splitter (binomial) loss with transmission *eta* on *dim* levels.

    Kraus operators A_k = Σ_n √C(n,k) √η^(n−k) √(1−η)^k |n−k⟩⟨n|. Loss only
    lowers photon number, so the truncated channel is exact.
    """

    def __init__(self, dim: int, eta: float) -> None:
        if dim < 1:
            raise DimensionError(f"dimension must be positive, got {dim}")
        self.dim = dim
        self.eta = require_unit_interval("eta", eta)
        kraus = np.zeros((dim, dim, dim), dtype=np.float64)
        for k in range(dim):
            for n in range(k, dim):
                kraus[k, n - k, n] = math.sqrt(
                    math.comb(n, k) * self.eta ** (n - k) * (1.0 - self.eta) ** k
                )
        self._kraus = kraus

    @property
    def kraus(self) -> np.ndarray:
        return self._kraus

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Λ_η(M) = Σ_k A_k M A_k†."""
        if self.eta == 1.0:
            return np.array(matrix, dtype=np.complex128, copy=True)
        out = self._kraus @ matrix @ self._kraus.transpose(0, 2, 1)
        return out.sum(axis=0)

    def adjoint(self, matrix: np.ndarray) -> np.ndarray:
        """Λ*_η(M) = Σ_k A_k† M A_k (Heisenberg picture)."""
        if self.eta == 1.0:
            return np.array(matrix, dtype=np.complex128, copy=True)
        out = self._kraus.transpose(0, 2, 1) @ matrix @ self._kraus
        return out.sum(axis=0)


def apply_loss(rho: DensityMatrix, eta: float) -> DensityMatrix:
    """Sends *rho* through a loss channel of transmission *eta*."""
    channel = LossChannel(rho.dim, eta)
    return DensityMatrix(channel.apply(rho.entries))


# ── Observables ───────────────────────────────────────────────────────────────

def photon_statistics(rho: DensityMatrix) -> PhotonDistribution:
    return PhotonDistribution(np.diag(rho.entries).real)


def mean_photon_number(rho: DensityMatrix) -> float:
    return float(np.arange(rho.dim) @ np.diag(rho.entries).real)


def purity(rho: DensityMatrix) -> float:
    """Tr ρ²."""
    return float(np.vdot(rho.entries, rho.entries).real)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    if values[0] < -config.PSD_TOL:
        raise NotPositiveError(f"matrix square root of a non-PSD input (eigenvalue {values[0]:.3e})")
    values = np.where(values > config.SQRT_EIGEN_FLOOR, values, 0.0)
    return (vectors * np.sqrt(values)) @ vectors.conj().T


def fidelity(rho_m: DensityMatrix, rho_p: DensityMatrix) -> float:
    """
    Uhlmann fidelity F = Tr[(√ρ_m ρ_p √ρ_m)^(1/2)].

    Both square roots come from Hermitian eigendecompositions; F is then
    the sum of singular values of √ρ_m √ρ_p, which equals the trace above
    and is symmetric in its arguments.
    """
    if rho_m.dim != rho_p.dim:
        raise DimensionError(f"fidelity between dims {rho_m.dim} and {rho_p.dim}")
    product = _psd_sqrt(rho_m.entries) @ _psd_sqrt(rho_p.entries)
    value = float(np.linalg.svd(product, compute_uv=False).sum())
    return min(1.0, max(0.0, value))
