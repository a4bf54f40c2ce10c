"""
Heralded Fock Tomography – Ingestion Module

Readers for every file the pipeline consumes: homodyne records (JSON lines),
density matrices (JSON), spectra and joint spectra (CSV), detector and
experiment configurations (JSON). Format problems raise DataFormatError.
"""
import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.errors import DataFormatError, FockTomographyError
from src.fock import DensityMatrix
from src.homodyne import QuadratureDataset
from src.source import ClickDetector
from src.spectral import JointSpectrum, SpectralAmplitude

logger = logging.getLogger(__name__)

SPECTRUM_HEADER = ("wavelength_nm", "amplitude")


def _require_file(path: Path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(
            f"{what} not found: {path}\n"
            "Check the path, or create the file with the corresponding subcommand."
        )
    return path


def _read_json(path: Path, what: str) -> dict:
    path = _require_file(path, what)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path.name}: invalid JSON ({exc})") from exc


# ── Homodyne records ──────────────────────────────────────────────────────────

def read_records(path: Path) -> Tuple[QuadratureDataset, Optional[dict]]:
    """
    Reads a JSON-lines record file.

    The first line may be a {"header": {...}} object describing the run;
    every other line is {"x", "theta", "clicks", "pulse"}.

    Returns:
        (dataset, header or None)
    """
    path = _require_file(path, "Record file")
    header = None
    x, theta, clicks, pulse = [], [], [], []
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path.name}:{line_no}: invalid JSON ({exc})") from exc
            if "header" in row:
                if line_no != 1:
                    raise DataFormatError(f"{path.name}:{line_no}: header allowed on the first line only")
                header = row["header"]
                continue
            try:
                x.append(float(row["x"]))
                theta.append(float(row["theta"]))
                clicks.append(int(row["clicks"]))
                pulse.append(int(row["pulse"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path.name}:{line_no}: bad record ({exc})") from exc
    if not x:
        raise DataFormatError(f"{path.name}: no records")
    try:
        dataset = QuadratureDataset(x=x, theta=theta, clicks=clicks, pulse=pulse)
    except FockTomographyError as exc:
        raise DataFormatError(f"{path.name}: {exc}") from exc
    if np.any(dataset.theta < 0.0) or np.any(dataset.theta >= 2.0 * np.pi):
        raise DataFormatError(f"{path.name}: LO phases must lie in [0, 2π)")
    logger.info("Read %d record(s) from '%s'.", len(dataset), path)
    return dataset, header


# ── States ────────────────────────────────────────────────────────────────────

def read_density_matrix(path: Path) -> DensityMatrix:
    """Reads a density-matrix JSON document, validating every state invariant."""
    payload = _read_json(path, "Density-matrix file")
    if isinstance(payload, dict) and "state" in payload:
        payload = payload["state"]
    if not isinstance(payload, dict):
        raise DataFormatError(f"{Path(path).name}: expected a JSON object")
    return DensityMatrix.from_json_dict(payload)


# ── Spectra ───────────────────────────────────────────────────────────────────

def read_spectrum(path: Path) -> SpectralAmplitude:
    """Reads a `wavelength_nm,amplitude` CSV."""
    path = _require_file(path, "Spectrum file")
    with path.open("r", encoding="utf-8") as handle:
        header = tuple(cell.strip() for cell in handle.readline().split(","))
    if header != SPECTRUM_HEADER:
        raise DataFormatError(f"{path.name}: expected header {','.join(SPECTRUM_HEADER)}, got {','.join(header)}")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataFormatError(f"{path.name}: {exc}") from exc
    if table.shape[1] != 2:
        raise DataFormatError(f"{path.name}: expected two columns")
    try:
        return SpectralAmplitude(table[:, 0], table[:, 1])
    except FockTomographyError as exc:
        raise DataFormatError(f"{path.name}: {exc}") from exc


def read_jsi(path: Path) -> JointSpectrum:
    """
    Reads a joint-spectrum CSV: the first row holds the trigger axis after a
    leading blank cell, each following row a signal wavelength and its
    intensities.
    """
    path = _require_file(path, "JSI file")
    try:
        table = np.genfromtxt(path, delimiter=",", filling_values=np.nan)
    except ValueError as exc:
        raise DataFormatError(f"{path.name}: {exc}") from exc
    if table.ndim != 2 or table.shape[0] < 3 or table.shape[1] < 3:
        raise DataFormatError(f"{path.name}: JSI grid needs at least two rows and two columns")
    trigger = table[0, 1:]
    signal = table[1:, 0]
    intensity = table[1:, 1:]
    if not (np.all(np.isfinite(trigger)) and np.all(np.isfinite(signal))):
        raise DataFormatError(f"{path.name}: non-numeric axis values")
    try:
        return JointSpectrum(signal, trigger, intensity)
    except FockTomographyError as exc:
        raise DataFormatError(f"{path.name}: {exc}") from exc


# ── Configurations ────────────────────────────────────────────────────────────

def read_detector(path: Path) -> ClickDetector:
    payload = _read_json(path, "Detector file")
    try:
        return ClickDetector.model_validate(payload)
    except ValidationError as exc:
        raise DataFormatError(f"{Path(path).name}: {exc.errors()[0]['msg']}") from exc


def read_config_document(path: Path) -> dict:
    """Raw experiment-configuration JSON; validation happens in the experiment module."""
    payload = _read_json(path, "Config file")
    if not isinstance(payload, dict):
        raise DataFormatError(f"{Path(path).name}: expected a JSON object")
    return payload
