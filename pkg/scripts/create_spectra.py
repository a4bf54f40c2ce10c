"""
Heralded Fock Tomography – Synthetic Spectra Generator

Writes an LO spectrum, a signal spectrum and a joint spectral intensity in
the CSV formats read by `main.py analyze-spectra`, so the budget pipeline
can be exercised without measured data.

Usage:
    python scripts/create_spectra.py [--out output/spectra] [--center 830]
        [--lo-fwhm 10] [--signal-fwhm 5] [--sigma-plus 3] [--sigma-minus 8]
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.output_writer import write_jsi, write_spectrum
from src.spectral import gaussian_jsi, gaussian_jsi_purity, gaussian_spectrum, spectral_overlap

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    datefmt="%H:%M:%S"
)
logger = logging.getLogger("create_spectra")


def create_spectra(
    out_dir: Path,
    center: float,
    lo_fwhm: float,
    signal_fwhm: float,
    sigma_plus: float,
    sigma_minus: float,
    points: int,
) -> dict:
    grid = np.linspace(center - 6 * lo_fwhm, center + 6 * lo_fwhm, points)
    lo = gaussian_spectrum(grid, center, lo_fwhm)
    signal = gaussian_spectrum(grid, center, signal_fwhm)
    width = 6 * max(sigma_plus, sigma_minus)
    axis = np.linspace(center - width, center + width, 121)
    jsi = gaussian_jsi(axis, axis, sigma_plus, sigma_minus, center, center)

    paths = {
        "lo": write_spectrum(lo, out_dir / "lo.csv"),
        "signal": write_spectrum(signal, out_dir / "signal.csv"),
        "jsi": write_jsi(jsi, out_dir / "jsi.csv"),
    }
    expected = {
        "overlap": spectral_overlap(lo, signal),
        "purity": gaussian_jsi_purity(sigma_plus, sigma_minus),
    }
    logger.info("Wrote %d synthetic inputs to %s (JSI purity %.4f)", len(paths), out_dir, expected["purity"])
    print("\n" + "=" * 40)
    for name, path in paths.items():
        print(f"  {name:<8}: {path}")
    print(f"  Expected overlap: {expected['overlap']:.6f}")
    print(f"  Expected purity : {expected['purity']:.6f}")
    print("=" * 40)
    return expected


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Write synthetic LO/signal spectra and a Gaussian JSI.")
    parser.add_argument("--out", type=Path, default=Path("output/spectra"), help="Output directory")
    parser.add_argument("--center", type=float, default=830.0, help="Center wavelength in nm")
    parser.add_argument("--lo-fwhm", type=float, default=10.0, help="LO spectral FWHM in nm")
    parser.add_argument("--signal-fwhm", type=float, default=5.0, help="Signal spectral FWHM in nm")
    parser.add_argument("--sigma-plus", type=float, default=3.0, help="Pump-envelope width in nm")
    parser.add_argument("--sigma-minus", type=float, default=8.0, help="Phase-matching width in nm")
    parser.add_argument("--points", type=int, default=2001, help="Spectrum grid points")

    args = parser.parse_args()
    create_spectra(
        args.out, args.center, args.lo_fwhm, args.signal_fwhm, args.sigma_plus, args.sigma_minus, args.points
    )
