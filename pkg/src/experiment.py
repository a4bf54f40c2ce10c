"""
Heralded Fock Tomography – Experiment Module

One JSON document describes a complete heralded-state experiment: source,
trigger detector, herald condition, signal-arm losses, homodyne detector,
run settings and reconstruction options. The cmd_* functions below are the
pipeline stages behind the CLI subcommands; each returns a summary dict and
writes its machine outputs through the output writer.
"""
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import config
from src.errors import ConfigError, ParameterError
from src.fock import (
    DensityMatrix,
    apply_loss,
    fock_state,
    mean_photon_number,
    photon_statistics,
    purity,
    fidelity,
)
from src.homodyne import (
    BhdModel,
    PhasePolicy,
    marginal_histogram,
    predicted_marginal,
    quadrature_pdf,
    sample_quadratures,
)
from src.ingestion import read_config_document, read_density_matrix, read_jsi, read_records, read_spectrum
from src.output_writer import (
    write_curve,
    write_density_matrix,
    write_histogram,
    write_json,
    write_records,
    write_table,
    write_wigner_grid,
)
from src.source import (
    ClickDetector,
    HeraldOutcome,
    HeraldSpec,
    TmsvSource,
    click_count_table,
    herald_rate,
    heralded_state,
    rate_table,
)
from src.spectral import (
    EfficiencyBudget,
    heralding_efficiency,
    mode_match_efficiency,
    purity_efficiency,
    schmidt_purity,
    spectral_overlap,
)
from src.tomography import ReconstructionOptions, mle_reconstruct
from src.utils import log_duration
from src.wigner import wigner_cross_section, wigner_grid, wigner_origin

logger = logging.getLogger(__name__)


# ── Configuration models ──────────────────────────────────────────────────────

class SignalLosses(BaseModel):
    """Signal-arm factors ahead of the homodyne detector, combined into one transmission."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    eta_mm: float = Field(default=config.ETA_MM, ge=0.0, le=1.0, description="LO/signal mode matching")
    eta_p: float = Field(default=config.ETA_P, ge=0.0, le=1.0, description="Spectral purity factor √P")
    eta_dc: float = Field(default=config.ETA_DC, ge=0.0, le=1.0, description="Dark-count false heralds")

    @property
    def transmission(self) -> float:
        return self.eta_mm * self.eta_p * self.eta_dc


class RunSettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_samples: int = Field(ge=1, description="Homodyne records to generate")
    seed: int = Field(ge=0, description="Top-level seed; every random stream derives from it")
    rep_rate: float = Field(default=config.REP_RATE_HZ, gt=0.0, description="Pulse repetition rate in Hz")
    phase_policy: PhasePolicy = Field(default_factory=PhasePolicy.uniform)
    workers: int = Field(default=config.DEFAULT_WORKERS, ge=1, description="Sampling threads")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    source: TmsvSource
    detector: ClickDetector = Field(default_factory=ClickDetector)
    herald: HeraldSpec
    signal_losses: SignalLosses = Field(default_factory=SignalLosses)
    bhd: BhdModel = Field(default_factory=BhdModel)
    run: RunSettings
    reconstruction: ReconstructionOptions = Field(default_factory=ReconstructionOptions)

    @model_validator(mode="after")
    def _herald_fits_detector(self) -> "ExperimentConfig":
        if self.herald.clicks > self.detector.n_detectors:
            raise ValueError(
                f"herald.clicks={self.herald.clicks} exceeds the {self.detector.n_detectors} detector(s)"
            )
        return self

    @property
    def overall_efficiency(self) -> float:
        return self.signal_losses.transmission * self.bhd.eta_bhd

    def budget(self) -> EfficiencyBudget:
        losses = self.signal_losses
        return EfficiencyBudget(
            eta_bhd=self.bhd.eta_bhd, eta_mm=losses.eta_mm, eta_p=losses.eta_p, eta_dc=losses.eta_dc
        )


def parse_config(payload: dict) -> ExperimentConfig:
    """Validates a config document; the first offending field is named in the error."""
    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise ConfigError(f"invalid config field '{where}': {first['msg']}") from exc


def load_config(path: Path) -> ExperimentConfig:
    cfg = parse_config(read_config_document(path))
    logger.info("Loaded config '%s' (λ=%.3f, herald k=%d)", Path(path).name, cfg.source.lam, cfg.herald.clicks)
    return cfg


def dump_config(cfg: ExperimentConfig) -> dict:
    """JSON-ready document that parse_config maps back to an equal config."""
    return cfg.model_dump(mode="json", by_alias=True)


def apply_overrides(
    cfg: ExperimentConfig,
    seed: Optional[int] = None,
    dim: Optional[int] = None,
    eta: Optional[float] = None,
    bins: Optional[int] = None,
) -> ExperimentConfig:
    """Returns *cfg* with CLI overrides applied and re-validated."""
    document = dump_config(cfg)
    if seed is not None:
        document["run"]["seed"] = seed
    for key, value in (("dim", dim), ("eta_correction", eta), ("n_bins", bins)):
        if value is not None:
            document["reconstruction"][key] = value
    return parse_config(document)


def reconstruction_options(
    base: Optional[ReconstructionOptions] = None,
    dim: Optional[int] = None,
    eta: Optional[float] = None,
    bins: Optional[int] = None,
) -> ReconstructionOptions:
    document = (base or ReconstructionOptions()).model_dump()
    for key, value in (("dim", dim), ("eta_correction", eta), ("n_bins", bins)):
        if value is not None:
            document[key] = value
    try:
        return ReconstructionOptions.model_validate(document)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "reconstruction"
        raise ConfigError(f"invalid reconstruction option '{where}': {first['msg']}") from exc


# ── Shared helpers ────────────────────────────────────────────────────────────

def prepare_signal(cfg: ExperimentConfig) -> Tuple[HeraldOutcome, DensityMatrix]:
    """Heralded state and the same state after the signal-arm losses."""
    outcome = heralded_state(cfg.source, cfg.detector, cfg.herald)
    return outcome, apply_loss(outcome.state, cfg.signal_losses.transmission)


def _probs(rho: DensityMatrix) -> list:
    return [round(float(p), 12) for p in photon_statistics(rho).probs]


def parse_reference(reference: str, dim: int) -> DensityMatrix:
    """
    Reference state from "fock:N" or "fock:N:eta" (|N⟩ through loss eta at
    dimension *dim*), or from a density-matrix file path.
    """
    if reference.startswith("fock:"):
        parts = reference.split(":")
        try:
            n = int(parts[1])
            eta = float(parts[2]) if len(parts) > 2 else 1.0
        except (IndexError, ValueError) as exc:
            raise ParameterError(f"reference '{reference}' is not of the form fock:N[:eta]") from exc
        if len(parts) > 3:
            raise ParameterError(f"reference '{reference}' is not of the form fock:N[:eta]")
        return apply_loss(fock_state(n, dim), eta)
    return read_density_matrix(Path(reference))


# ── Subcommands ───────────────────────────────────────────────────────────────

@log_duration("simulate")
def cmd_simulate(cfg: ExperimentConfig, out_path: Path) -> dict:
    """
    Herald, apply the signal losses, sample homodyne records and write them
    as JSON lines with a header line describing the run.
    """
    outcome, signal = prepare_signal(cfg)
    rate = herald_rate(cfg.source, cfg.detector, cfg.herald, cfg.run.rep_rate)
    logger.info("Herald k=%d: %.4g events/s (%.3e per pulse)", cfg.herald.clicks, rate, outcome.probability)

    records = sample_quadratures(
        signal,
        cfg.run.n_samples,
        cfg.run.phase_policy,
        cfg.bhd,
        cfg.run.seed,
        herald_clicks=cfg.herald.clicks,
        herald_probability=outcome.probability,
        workers=cfg.run.workers,
    )
    header = {
        "seed": cfg.run.seed,
        "n_samples": cfg.run.n_samples,
        "herald_clicks": cfg.herald.clicks,
        "lambda": cfg.source.lam,
        "herald_probability": outcome.probability,
        "herald_rate_hz": rate,
        "signal_transmission": cfg.signal_losses.transmission,
        "eta_bhd": cfg.bhd.eta_bhd,
        "overall_efficiency": cfg.overall_efficiency,
        "detector": cfg.detector.model_dump(mode="json"),
        "heralded_photon_probs": _probs(outcome.state),
    }
    write_records(records, out_path, header=header)
    return {
        "records": len(records),
        "herald_rate_hz": rate,
        "herald_probability": outcome.probability,
        "overall_efficiency": cfg.overall_efficiency,
        "output": str(out_path),
    }


@log_duration("reconstruct")
def cmd_reconstruct(records_path: Path, opts: ReconstructionOptions, out_path: Path) -> dict:
    """
    MLE reconstruction of a record file. Writes the state, a report and the
    marginal histogram of the records next to it.
    """
    records, _ = read_records(records_path)
    report = mle_reconstruct(records, opts)
    out_path = Path(out_path)
    write_density_matrix(report.state, out_path)
    lo, hi = float(records.x.min()), float(records.x.max())
    edges = np.linspace(lo, max(hi, lo + 1e-9), config.HISTOGRAM_BINS + 1)
    write_histogram(marginal_histogram(records, edges), out_path.with_name(out_path.stem + "_histogram.csv"))
    report_path = out_path.with_name(out_path.stem + "_report.json")
    summary = report.summary()
    summary["options"] = opts.model_dump()
    summary["photon_probs"] = _probs(report.state)
    summary["wigner_origin"] = wigner_origin(report.state)
    write_json(summary, report_path)
    return {
        "records": len(records),
        "iterations": report.iterations,
        "converged": report.converged,
        "final_loglik": report.final_loglik,
        "wigner_origin": summary["wigner_origin"],
        "output": str(out_path),
        "report": str(report_path),
    }


@log_duration("analyze")
def cmd_analyze(
    state_path: Path,
    out_dir: Path,
    reference: Optional[str] = None,
    workers: int = config.DEFAULT_WORKERS,
) -> dict:
    """
    Photon statistics, W(0,0), purity and (optionally) fidelity against a
    reference, plus marginal, Wigner grid and cross-section CSVs.
    """
    rho = read_density_matrix(state_path)
    out_dir = Path(out_dir)
    analysis = {
        "dim": rho.dim,
        "photon_probs": _probs(rho),
        "mean_photon_number": mean_photon_number(rho),
        "purity": purity(rho),
        "wigner_origin": wigner_origin(rho),
    }
    if reference is not None:
        ref_state = parse_reference(reference, rho.dim)
        analysis["reference"] = reference
        analysis["fidelity"] = fidelity(rho, ref_state)
        logger.info("Fidelity against %s: %.6f", reference, analysis["fidelity"])

    x = np.linspace(-config.MARGINAL_EXTENT, config.MARGINAL_EXTENT, config.MARGINAL_POINTS)
    write_curve(x, quadrature_pdf(rho, 0.0, x), out_dir / "marginal.csv", ("x", "pdf"))
    grid = wigner_grid(rho, workers=workers)
    write_wigner_grid(grid, out_dir / "wigner.csv")
    write_curve(grid.x_axis, wigner_cross_section(rho, "P=0", grid.x_axis), out_dir / "wigner_p0.csv", ("x", "w"))
    write_curve(grid.p_axis, wigner_cross_section(rho, "X=0", grid.p_axis), out_dir / "wigner_x0.csv", ("p", "w"))
    write_json(analysis, out_dir / "analysis.json")
    return analysis


@log_duration("predict")
def cmd_predict(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> dict:
    """
    Analytic predictions without sampling: heralded state, signal state
    after losses, rates for every click count, efficiency budget, W(0,0)
    and the lossy quadrature marginal.
    """
    outcome, signal = prepare_signal(cfg)
    detected = apply_loss(signal, cfg.bhd.eta_bhd)
    rates = rate_table(cfg.source, cfg.detector, cfg.run.rep_rate)
    budget = cfg.budget()
    prediction = {
        "herald_clicks": cfg.herald.clicks,
        "herald_probability": outcome.probability,
        "herald_rate_hz": outcome.probability * cfg.run.rep_rate,
        "rates_hz": {str(k): v for k, v in rates.items()},
        "heralded_photon_probs": _probs(outcome.state),
        "signal_photon_probs": _probs(signal),
        "detected_photon_probs": _probs(detected),
        "budget": budget.model_dump(),
        "overall_efficiency": budget.total,
        "wigner_origin_signal": wigner_origin(signal),
        "wigner_origin_detected": wigner_origin(detected),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        x = np.linspace(-config.MARGINAL_EXTENT, config.MARGINAL_EXTENT, config.MARGINAL_POINTS)
        curves = np.column_stack((
            x,
            quadrature_pdf(detected, 0.0, x),
            predicted_marginal(cfg.herald.clicks, budget.total, x),
        ))
        write_table(curves, out_dir / "predicted_marginal.csv", ["x", "heralded_pdf", "fock_pdf"])
        write_density_matrix(signal, out_dir / "predicted_rho.json")
        write_json(prediction, out_dir / "prediction.json")
    return prediction


def cmd_povm(det: ClickDetector, n_max: int) -> dict:
    """Click-count POVM table p(k|n), k = 0 … N_det, n = 0 … n_max."""
    if n_max < 0:
        raise ParameterError(f"n_max must be non-negative, got {n_max}")
    table = click_count_table(det, n_max)
    return {
        "n_max": n_max,
        "detector": det.model_dump(mode="json"),
        "table": table.tolist(),
    }


@log_duration("analyze-spectra")
def cmd_analyze_spectra(
    lo_path: Optional[Path] = None,
    signal_path: Optional[Path] = None,
    jsi_path: Optional[Path] = None,
    visibility: Optional[float] = None,
    eta_mm: Optional[float] = None,
    r_coinc: Optional[float] = None,
    r_trigger: Optional[float] = None,
    eta_apd: float = config.ETA_APD,
    eta_bhd: float = config.ETA_BHD,
    eta_dc: float = config.ETA_DC,
) -> dict:
    """
    Efficiency budget from measured spectra: LO/signal overlap, JSI purity,
    heralding efficiency from coincidence rates, and their combination.
    Factors that cannot be computed from the inputs take the defaults.
    """
    result: dict = {}
    overlap = None
    if lo_path is not None and signal_path is not None:
        overlap = spectral_overlap(read_spectrum(lo_path), read_spectrum(signal_path))
        result["spectral_overlap"] = overlap
    eta_p = config.ETA_P
    if jsi_path is not None:
        schmidt = schmidt_purity(read_jsi(jsi_path))
        eta_p = purity_efficiency(min(1.0, schmidt.purity))
        result["schmidt"] = {
            "purity": schmidt.purity,
            "schmidt_number": schmidt.schmidt_number,
            "leading_coefficients": schmidt.coefficients[:5],
        }
    eta_he = None
    if r_coinc is not None and r_trigger is not None:
        he = heralding_efficiency(r_coinc, r_trigger, eta_apd)
        eta_he = he.value
        result["heralding_efficiency"] = he.model_dump()

    if eta_mm is not None or visibility is not None or (eta_he is not None and overlap is not None):
        eta_mm_value = mode_match_efficiency(
            visibility=visibility, eta_he=min(1.0, eta_he) if eta_he is not None else None,
            overlap=overlap, override=eta_mm,
        )
    else:
        eta_mm_value = config.ETA_MM
    budget = EfficiencyBudget(eta_bhd=eta_bhd, eta_mm=eta_mm_value, eta_p=eta_p, eta_dc=eta_dc)
    result["budget"] = budget.model_dump()
    result["overall_efficiency"] = budget.total
    logger.info("Efficiency budget: %.4f", budget.total)
    return result

