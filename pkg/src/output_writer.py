"""
Heralded Fock Tomography – Output Writer Module

Writes pipeline results in the documented machine formats:
  - records:  JSON lines, optional header line first
  - states:   density-matrix JSON
  - grids:    CSV (histograms, Wigner grids, two-column curves, spectra)
  - reports:  pretty-printed JSON
Output is a function of the inputs only (no timestamps), so identical runs
produce byte-identical files.
"""
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from src.fock import DensityMatrix
from src.homodyne import Histogram, QuadratureDataset
from src.spectral import JointSpectrum, SpectralAmplitude
from src.wigner import PhaseSpaceGrid

logger = logging.getLogger(__name__)

# ── Public API ────────────────────────────────────────────────────────────────


def write_json(payload: dict, path: Path) -> Path:
    path = _prepare(path)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    logger.info("Written: %s", path.name)
    return path


def write_records(records: QuadratureDataset, path: Path, header: Optional[dict] = None) -> Path:
    """One {"x", "theta", "clicks", "pulse"} object per line, floats in repr precision."""
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        if header is not None:
            handle.write(json.dumps({"header": header}, sort_keys=True) + "\n")
        for x, theta, clicks, pulse in zip(
            records.x.tolist(), records.theta.tolist(), records.clicks.tolist(), records.pulse.tolist()
        ):
            handle.write(json.dumps({"x": x, "theta": theta, "clicks": clicks, "pulse": pulse}) + "\n")
    logger.info("Written: %s (%d records)", path.name, len(records))
    return path


def write_density_matrix(rho: DensityMatrix, path: Path) -> Path:
    return write_json(rho.to_json_dict(), path)


def write_histogram(hist: Histogram, path: Path) -> Path:
    """CSV `bin_lo,bin_hi,count,error`."""
    table = np.column_stack((hist.bin_edges[:-1], hist.bin_edges[1:], hist.counts, hist.errors))
    return _savetxt(path, table, "bin_lo,bin_hi,count,error", ("%.10g", "%.10g", "%d", "%.10g"))


def write_wigner_grid(grid: PhaseSpaceGrid, path: Path) -> Path:
    """
    Wigner grid CSV: two axis header lines (`x_axis,…` and `p_axis,…`), then
    one row of W(x_i, p_j) per x value.
    """
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("x_axis," + ",".join(f"{v:.10g}" for v in grid.x_axis) + "\n")
        handle.write("p_axis," + ",".join(f"{v:.10g}" for v in grid.p_axis) + "\n")
        np.savetxt(handle, grid.values, delimiter=",", fmt="%.12e")
    logger.info("Written: %s", path.name)
    return path


def write_curve(x, y, path: Path, columns: tuple = ("x", "value")) -> Path:
    """Two-column CSV, e.g. marginals and Wigner cross-sections."""
    table = np.column_stack((np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)))
    return _savetxt(path, table, ",".join(columns), "%.12e")


def write_table(table, path: Path, columns: list) -> Path:
    return _savetxt(path, np.asarray(table, dtype=np.float64), ",".join(columns), "%.12e")


def write_spectrum(spectrum: SpectralAmplitude, path: Path) -> Path:
    """CSV `wavelength_nm,amplitude`."""
    table = np.column_stack((spectrum.wavelengths, spectrum.amplitudes))
    return _savetxt(path, table, "wavelength_nm,amplitude", "%.12e")


def write_jsi(jsi: JointSpectrum, path: Path) -> Path:
    """
    JSI CSV: first row a blank cell then the trigger axis, each following
    row a signal wavelength then its intensities.
    """
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write("," + ",".join(f"{v:.10g}" for v in jsi.trigger_axis) + "\n")
        np.savetxt(handle, np.column_stack((jsi.signal_axis, jsi.intensity)), delimiter=",", fmt="%.12e")
    logger.info("Written: %s", path.name)
    return path


# ── Private helpers ───────────────────────────────────────────────────────────

def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _savetxt(path: Path, table: np.ndarray, header: str, fmt) -> Path:
    path = _prepare(path)
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=fmt)
    logger.info("Written: %s", path.name)
    return path