"""
Heralded Fock Tomography – Tomography Module

Iterative maximum-likelihood (RρR) reconstruction of a density matrix from
homodyne records, optionally corrected for a known detection efficiency.

Data enter the likelihood through quadrature projectors Π = |x_θ⟩⟨x_θ|.
Efficiency correction pushes each projector through the adjoint loss
channel, which is done once per iteration on the aggregated operator R
instead of per datum (the adjoint is linear).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

import config
from src.errors import ParameterError
from src.fock import DensityMatrix, LossChannel, normalize, repair_psd
from src.homodyne import RecordsLike, as_dataset, eigenfunctions

logger = logging.getLogger(__name__)


# ── Domain types ──────────────────────────────────────────────────────────────

class ReconstructionOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: int = Field(default=config.DEFAULT_DIM, ge=1, description="Fock truncation of the estimate")
    eta_correction: float = Field(
        default=1.0, gt=0.0, le=1.0, description="Efficiency corrected for (1 means none)"
    )
    max_iters: int = Field(default=config.MLE_MAX_ITERS, ge=1)
    tol: float = Field(default=config.MLE_TOL, gt=0.0, description="Stop when max |Δρ_mn| falls below")
    n_bins: int = Field(default=config.MLE_BINS, ge=0, description="Quadrature bins, 0 for per-sample operators")
    min_eta_correction: float = Field(
        default=config.MLE_MIN_ETA_CORRECTION,
        gt=0.0,
        le=1.0,
        description="Smallest correction efficiency accepted",
    )

    @model_validator(mode="after")
    def _cap_correction(self) -> "ReconstructionOptions":
        if self.eta_correction < self.min_eta_correction:
            raise ValueError(
                f"eta_correction={self.eta_correction} below the allowed minimum "
                f"{self.min_eta_correction}; lower min_eta_correction to override"
            )
        return self


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    state: DensityMatrix
    iterations: int
    final_loglik: float
    converged: bool
    loglik_trace: List[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "dim": self.state.dim,
            "iterations": self.iterations,
            "final_loglik": self.final_loglik,
            "converged": self.converged,
            "loglik_trace": list(self.loglik_trace),
        }


# ── Projectors ────────────────────────────────────────────────────────────────

def quadrature_projector(x: float, theta: float, dim: int, eta: float = 1.0) -> np.ndarray:
    """
    POVM element for outcome x at phase θ, seen through efficiency *eta*.

    Π_mn = ψ_m(x) ψ_n(x) e^(i(m−n)θ), so that Tr[ρ Π] = pr(x|θ); for
    eta < 1 the result is Λ*_η(Π).
    """
    if dim < 1:
        raise ParameterError(f"dimension must be positive, got {dim}")
    if not 0.0 < eta <= 1.0:
        raise ParameterError(f"correction efficiency must lie in (0, 1], got {eta}")
    vector = eigenfunctions(dim - 1, np.asarray(float(x))) * np.exp(1j * np.arange(dim) * theta)
    projector = np.outer(vector, vector.conj())
    return LossChannel(dim, eta).adjoint(projector)


class _DataModel:
    """
    Canonicalized data as weighted rank-one operators v_j v_j†.

    Binned data (θ pooled) use phase-averaged, bin-integrated projectors,
    which are diagonal; per-sample data keep the full phase dependence.
    """

    def __init__(self, records: RecordsLike, opts: ReconstructionOptions) -> None:
        data = as_dataset(records)
        if len(data) == 0:
            raise ParameterError("reconstruction needs at least one record")
        dim = opts.dim
        theta = np.mod(data.theta, 2.0 * math.pi)
        order = np.lexsort((theta, data.x))
        x = data.x[order]
        theta = theta[order]

        if opts.n_bins > 0:
            levels, level_counts = np.unique(x, return_counts=True)
            step = _lattice_step(levels, x.size)
            if step is not None:
                # Digitized data: one bin per occupied ADC level
                mids, half, counts = levels, np.full(levels.size, 0.5 * step), level_counts
                logger.info("MLE: digitized data, %d occupied levels of width %.4g", levels.size, step)
            else:
                lo, hi = float(x[0]), float(x[-1])
                if hi <= lo:
                    hi = lo + 1e-9
                edges = np.linspace(lo, hi, opts.n_bins + 1)
                counts, _ = np.histogram(x, bins=edges)
                half = 0.5 * np.diff(edges)
                mids = 0.5 * (edges[:-1] + edges[1:])
            nodes, node_w = np.polynomial.legendre.leggauss(config.MLE_BIN_QUAD_NODES)
            points = mids[:, None] + half[:, None] * nodes[None, :]
            psi2 = eigenfunctions(dim - 1, points) ** 2
            # ∫_bin ψ_n² dx for every n and bin
            bin_diag = np.einsum("nbq,q,b->nb", psi2, node_w, half)
            keep = counts > 0
            self.diagonal = True
            self.weights = counts[keep].astype(np.float64)
            self.ops = bin_diag[:, keep]
            self.n_bins = int(keep.sum())
        else:
            self.diagonal = False
            self.weights = np.ones(x.size, dtype=np.float64)
            self.ops = eigenfunctions(dim - 1, x) * np.exp(1j * np.arange(dim)[:, None] * theta[None, :])
            self.n_bins = 0
        self.total = float(self.weights.sum())
        self.channel = LossChannel(dim, opts.eta_correction)

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        """Tr[ρ Π_j^η] = Tr[Λ_η(ρ) Π_j] for every datum."""
        lossy = self.channel.apply(rho)
        if self.diagonal:
            return np.diag(lossy).real @ self.ops
        return np.sum(self.ops.conj() * (lossy @ self.ops), axis=0).real

    def r_operator(self, probs: np.ndarray) -> np.ndarray:
        """R = Λ*_η(Σ_j f_j Π_j / p_j), normalized by the total count."""
        scale = self.weights / (probs * self.total)
        if self.diagonal:
            inner = np.diag(self.ops @ scale).astype(np.complex128)
        else:
            inner = (self.ops * scale) @ self.ops.conj().T
        return self.channel.adjoint(inner)

    def loglik(self, probs: np.ndarray) -> float:
        if np.any(probs <= 0.0):
            return -math.inf
        return float(self.weights @ np.log(probs))


def _lattice_step(levels: np.ndarray, n_records: int):
    """Level spacing when the distinct values sit on a uniform lattice, else None."""
    if levels.size < 2 or levels.size > config.MLE_DIGITIZED_MAX_DISTINCT * n_records:
        return None
    gaps = np.diff(levels)
    step = float(gaps.min())
    multiples = gaps / step
    if np.max(np.abs(multiples - np.round(multiples))) > config.MLE_LATTICE_TOL * max(1.0, multiples.max()):
        return None
    return step


def _floored(probs: np.ndarray) -> np.ndarray:
    low = probs < config.MLE_PROB_FLOOR
    if np.any(low):
        logger.warning(
            "%d datum/data have probability below %.0e under the current estimate; weight floored",
            int(low.sum()),
            config.MLE_PROB_FLOOR,
        )
        return np.where(low, config.MLE_PROB_FLOOR, probs)
    return probs


# ── Likelihood ────────────────────────────────────────────────────────────────

def log_likelihood(rho: DensityMatrix, records: RecordsLike, opts: ReconstructionOptions) -> float:
    """
    Σ_j f_j ln Tr[ρ Π_j] over the (binned or per-sample) operators of *opts*;
    −inf when an occupied bin has zero probability.
    """
    if rho.dim != opts.dim:
        raise ParameterError(f"state dim {rho.dim} differs from reconstruction dim {opts.dim}")
    model = _DataModel(records, opts)
    return model.loglik(model.probabilities(rho.entries))


# ── Reconstruction ────────────────────────────────────────────────────────────

def mle_reconstruct(records: RecordsLike, opts: ReconstructionOptions) -> ReconstructionReport:
    """
    RρR iteration from the maximally mixed state.

    Each step is ρ ← N[R ρ R]. A step that lowers the likelihood by more
    than the numerical slack is replaced by the diluted step
    N[(I+εR) ρ (I+εR)] with ε halved until the likelihood no longer drops.
    Stops when max |Δρ_mn| < tol or after max_iters.
    """
    model = _DataModel(records, opts)
    dim = opts.dim
    identity = np.eye(dim, dtype=np.complex128)
    rho = identity / dim
    probs = model.probabilities(rho)
    loglik = model.loglik(probs)
    trace = [loglik]
    converged = False
    iterations = 0
    logger.info(
        "MLE: %d records, dim=%d, eta_correction=%.3f, %s",
        int(model.total),
        dim,
        opts.eta_correction,
        f"{model.n_bins} occupied bins" if model.n_bins else "per-sample operators",
    )

    for iterations in range(1, opts.max_iters + 1):
        r_op = model.r_operator(_floored(probs))
        candidate = repair_psd(r_op @ rho @ r_op).entries
        cand_probs = model.probabilities(candidate)
        cand_loglik = model.loglik(cand_probs)

        epsilon = 1.0
        halvings = 0
        while cand_loglik < loglik - config.MLE_LOGLIK_SLACK and halvings < config.MLE_MAX_DILUTION_HALVINGS:
            step = identity + epsilon * r_op
            candidate = repair_psd(step @ rho @ step).entries
            cand_probs = model.probabilities(candidate)
            cand_loglik = model.loglik(cand_probs)
            epsilon *= 0.5
            halvings += 1
        if cand_loglik < loglik - config.MLE_LOGLIK_SLACK:
            logger.warning("MLE: no likelihood-increasing step found at iteration %d; stopping", iterations)
            break
        if halvings:
            logger.debug("MLE iteration %d: diluted step with epsilon=%.2e", iterations, 2.0 * epsilon)

        change = float(np.max(np.abs(candidate - rho)))
        rho, probs, loglik = candidate, cand_probs, cand_loglik
        trace.append(loglik)
        logger.debug("MLE iteration %d: loglik=%.10f change=%.3e", iterations, loglik, change)
        if change < opts.tol:
            converged = True
            break

    if not converged:
        logger.warning("MLE did not converge within %d iterations (tol %.1e)", opts.max_iters, opts.tol)
    state = normalize(rho)
    logger.info("MLE finished after %d iterations, loglik=%.6f", iterations, loglik)
    return ReconstructionReport(
        state=state,
        iterations=iterations,
        final_loglik=loglik,
        converged=converged,
        loglik_trace=trace,
    )
