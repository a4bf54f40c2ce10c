"""
Heralded Fock Tomography – CLI Entry Point

Usage:
    python main.py simulate --config CONFIG [--out records.jsonl] [--seed N]
    python main.py reconstruct --in records.jsonl [--dim D] [--eta E] [--bins B] [--out rho.json]
    python main.py analyze --in rho.json [--reference fock:3:0.64] [--out DIR]
    python main.py predict --config CONFIG [--out DIR] [--format json|csv]
    python main.py povm [--config CONFIG | --detector det.json] [--n-max N] [--format json|csv]
    python main.py analyze-spectra [--lo lo.csv --signal signal.csv] [--jsi jsi.csv] [--visibility V] [--eta-dc E]

Examples:
    python main.py simulate --config configs/single_photon.json
    python main.py reconstruct --in output/records.jsonl --dim 8 --eta 0.85 --bins 200 --out output/rho.json
    python main.py analyze --in output/rho.json --reference fock:1:0.6402

Exit codes: 0 success, 2 configuration or parameter error, 3 numerical
failure, 4 I/O or data-format error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

# Ensure src/ is importable when running from project root
sys.path.insert(0, str(Path(__file__).parent))

import config
from src.audit import AuditLog
from src.errors import ConfigError, DataFormatError, NumericalError, ParameterError
from src.experiment import (
    apply_overrides,
    cmd_analyze,
    cmd_analyze_spectra,
    cmd_povm,
    cmd_predict,
    cmd_reconstruct,
    cmd_simulate,
    load_config,
    reconstruction_options,
)
from src.ingestion import read_detector
from src.output_writer import write_json
from src.source import ClickDetector

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s – %(message)s",
        datefmt="%H:%M:%S",
    )


def _parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Heralded Fock Tomography – simulate, reconstruct and analyze heralded Fock states.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Generate homodyne records for a heralded state.")
    sim.add_argument("--config", type=Path, required=True, metavar="PATH", help="Experiment config JSON")
    sim.add_argument("--out", type=Path, default=config.OUTPUT_DIR / "records.jsonl", metavar="PATH",
                     help=f"Record file (default: {config.OUTPUT_DIR / 'records.jsonl'})")
    sim.add_argument("--seed", type=int, default=None, help="Override run.seed")

    rec = sub.add_parser("reconstruct", help="Maximum-likelihood reconstruction of a record file.")
    rec.add_argument("--in", dest="input", type=Path, required=True, metavar="PATH", help="Record file (JSON lines)")
    rec.add_argument("--out", type=Path, default=config.OUTPUT_DIR / "rho.json", metavar="PATH",
                     help=f"Density-matrix file (default: {config.OUTPUT_DIR / 'rho.json'})")
    rec.add_argument("--config", type=Path, default=None, metavar="PATH",
                     help="Take reconstruction options from this experiment config")
    rec.add_argument("--dim", type=int, default=None, help="Fock truncation of the estimate")
    rec.add_argument("--eta", type=float, default=None, help="Detection efficiency to correct for")
    rec.add_argument("--bins", type=int, default=None, help="Quadrature bins, 0 for per-sample operators")

    ana = sub.add_parser("analyze", help="Photon statistics, Wigner function and fidelity of a state.")
    ana.add_argument("--in", dest="input", type=Path, required=True, metavar="PATH", help="Density-matrix file")
    ana.add_argument("--out", type=Path, default=config.OUTPUT_DIR / "analysis", metavar="DIR",
                     help=f"Output folder (default: {config.OUTPUT_DIR / 'analysis'})")
    ana.add_argument("--reference", default=None, help="fock:N[:eta] or a density-matrix file")
    ana.add_argument("--workers", type=int, default=config.DEFAULT_WORKERS, help="Wigner grid threads")

    pre = sub.add_parser("predict", help="Analytic predictions for an experiment config.")
    pre.add_argument("--config", type=Path, required=True, metavar="PATH", help="Experiment config JSON")
    pre.add_argument("--out", type=Path, default=config.OUTPUT_DIR / "prediction", metavar="DIR",
                     help=f"Output folder (default: {config.OUTPUT_DIR / 'prediction'})")
    pre.add_argument("--format", choices=["json", "csv"], default="json", help="Rendering on stdout")

    povm = sub.add_parser("povm", help="Click-count POVM table of the trigger detector.")
    source = povm.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, default=None, metavar="PATH", help="Experiment config JSON")
    source.add_argument("--detector", type=Path, default=None, metavar="PATH", help="Detector JSON")
    povm.add_argument("--n-max", type=int, default=6, help="Largest photon number in the table (default: 6)")
    povm.add_argument("--format", choices=["json", "csv"], default="json", help="Rendering on stdout")

    spectra = sub.add_parser("analyze-spectra", help="Efficiency budget from measured spectra.")
    spectra.add_argument("--lo", type=Path, default=None, metavar="PATH", help="LO spectrum CSV")
    spectra.add_argument("--signal", type=Path, default=None, metavar="PATH", help="Signal spectrum CSV")
    spectra.add_argument("--jsi", type=Path, default=None, metavar="PATH", help="Joint spectral intensity CSV")
    spectra.add_argument("--visibility", type=float, default=None, help="Classical LO/signal visibility")
    spectra.add_argument("--eta-mm", type=float, default=None, help="Mode-matching efficiency override")
    spectra.add_argument("--r-coinc", type=float, default=None, help="Coincidence rate (1/s)")
    spectra.add_argument("--r-trigger", type=float, default=None, help="Trigger rate (1/s)")
    spectra.add_argument("--eta-apd", type=float, default=config.ETA_APD, help="APD efficiency")
    spectra.add_argument("--eta-bhd", type=float, default=config.ETA_BHD, help="Homodyne detector efficiency")
    spectra.add_argument("--eta-dc", type=float, default=config.ETA_DC, help="Dark-count efficiency factor")
    spectra.add_argument("--out", type=Path, default=None, metavar="PATH", help="Also write the budget JSON here")
    return parser.parse_args(argv)


def _report_dir(args: argparse.Namespace) -> Path:
    """Folder receiving the audit report: the output folder, or the folder of the output file."""
    out = getattr(args, "out", None)
    if out is None:
        return config.OUTPUT_DIR
    return out if args.command in ("analyze", "predict") else out.parent


def _run(args: argparse.Namespace, audit: AuditLog) -> dict:
    """Executes one subcommand and returns its summary."""
    if args.command == "simulate":
        with audit.stage("config"):
            cfg = apply_overrides(load_config(args.config), seed=args.seed)
        with audit.stage("simulate") as figures:
            summary = cmd_simulate(cfg, args.out)
            figures.update(summary)
        return summary

    if args.command == "reconstruct":
        with audit.stage("config"):
            base = load_config(args.config).reconstruction if args.config else None
            opts = reconstruction_options(base, dim=args.dim, eta=args.eta, bins=args.bins)
        with audit.stage("reconstruct") as figures:
            summary = cmd_reconstruct(args.input, opts, args.out)
            figures.update(summary)
        return summary

    if args.command == "analyze":
        with audit.stage("analyze") as figures:
            summary = cmd_analyze(args.input, args.out, reference=args.reference, workers=args.workers)
            figures.update({k: v for k, v in summary.items() if k != "photon_probs"})
        return summary

    if args.command == "predict":
        with audit.stage("config"):
            cfg = load_config(args.config)
        with audit.stage("predict") as figures:
            summary = cmd_predict(cfg, args.out)
            figures["overall_efficiency"] = summary["overall_efficiency"]
        if args.format == "csv":
            print("clicks,rate_hz")
            for k, rate in summary["rates_hz"].items():
                print(f"{k},{rate:.10g}")
        else:
            print(json.dumps(summary, indent=2))
        return summary

    if args.command == "povm":
        with audit.stage("config"):
            if args.config:
                det = load_config(args.config).detector
            elif args.detector:
                det = read_detector(args.detector)
            else:
                det = ClickDetector()
        with audit.stage("povm"):
            summary = cmd_povm(det, args.n_max)
        if args.format == "csv":
            print("k," + ",".join(f"n{n}" for n in range(args.n_max + 1)))
            for k, row in enumerate(summary["table"]):
                print(f"{k}," + ",".join(f"{p:.12g}" for p in row))
        else:
            print(json.dumps(summary, indent=2))
        return summary

    if args.command == "analyze-spectra":
        with audit.stage("analyze-spectra") as figures:
            summary = cmd_analyze_spectra(
                lo_path=args.lo,
                signal_path=args.signal,
                jsi_path=args.jsi,
                visibility=args.visibility,
                eta_mm=args.eta_mm,
                r_coinc=args.r_coinc,
                r_trigger=args.r_trigger,
                eta_apd=args.eta_apd,
                eta_bhd=args.eta_bhd,
                eta_dc=args.eta_dc,
            )
            figures["overall_efficiency"] = summary["overall_efficiency"]
        print(json.dumps(summary, indent=2))
        if args.out is not None:
            write_json(summary, args.out)
        return summary

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None) -> int:
    args = _parse_args(argv)
    _setup_logging(args.verbose)
    logger = logging.getLogger("main")
    logger.info("=== Heralded Fock Tomography: %s ===", args.command)

    audit = AuditLog(args.command)
    try:
        summary = _run(args, audit)
    except (ConfigError, ParameterError, ValidationError) as exc:
        logger.error("Configuration error: %s", exc)
        code = EXIT_CONFIG
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc)
        code = EXIT_NUMERICAL
    except (DataFormatError, OSError) as exc:
        logger.error("I/O error: %s", exc)
        code = EXIT_IO
    else:
        code = EXIT_OK

    try:
        report_path = audit.write_report(_report_dir(args))
    except OSError as exc:
        logger.error("Could not write the audit report: %s", exc)
        return code or EXIT_IO
    if code != EXIT_OK:
        return code
    _print_summary(args.command, summary, report_path)
    return EXIT_OK


def _print_summary(command: str, summary: dict, report_path: Path) -> None:
    """Prints a final human-readable summary to stderr (stdout carries machine output)."""
    shown = {k: v for k, v in summary.items() if not isinstance(v, (list, dict))}
    out = sys.stderr
    print(file=out)
    print("=" * 56, file=out)
    print(f"  Command              : {command}", file=out)
    for key, value in shown.items():
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        print(f"  {key:<21}: {text}", file=out)
    print(f"  Audit report         : {report_path}", file=out)
    print("=" * 56, file=out)


if __name__ == "__main__":
    sys.exit(main())
