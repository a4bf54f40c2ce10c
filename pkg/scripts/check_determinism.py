"""
Heralded Fock Tomography – Determinism Checker

Runs `simulate` and `reconstruct` twice for one config in separate folders
and compares MD5 hashes of the records, the density matrix and the
reconstruction report. Any difference means a random stream or a merge
order leaked into the output.

Usage:
    python scripts/check_determinism.py --config configs/single_photon.json [--workdir output/determinism]
"""
import argparse
import hashlib
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

import main as cli

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(message)s",
    datefmt="%H:%M:%S"
)
logger = logging.getLogger("determinism")

COMPARED = ("records.jsonl", "rho.json", "rho_report.json")


def get_file_hash(path: Path) -> str:
    """Computes MD5 hash of a file."""
    hasher = hashlib.md5()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            hasher.update(chunk)
    return hasher.hexdigest()


def run_once(config_path: Path, run_dir: Path) -> dict:
    records = run_dir / "records.jsonl"
    rho = run_dir / "rho.json"
    for argv in (
        ["simulate", "--config", str(config_path), "--out", str(records)],
        ["reconstruct", "--in", str(records), "--config", str(config_path), "--out", str(rho)],
    ):
        code = cli.main(argv)
        if code != 0:
            raise RuntimeError(f"'{' '.join(argv[:1])}' exited with code {code}")
    return {name: get_file_hash(run_dir / name) for name in COMPARED}


def check(config_path: Path, workdir: Path) -> bool:
    first = run_once(config_path, workdir / "run_a")
    second = run_once(config_path, workdir / "run_b")
    mismatched = [name for name in COMPARED if first[name] != second[name]]

    print("\n" + "=" * 40)
    for name in COMPARED:
        status = "OK" if first[name] == second[name] else "DIFFERS"
        print(f"  {name:<16}: {first[name][:12]}  {status}")
    print(f"  Result          : {'deterministic' if not mismatched else 'NOT deterministic'}")
    print("=" * 40)
    return not mismatched


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Check that simulate+reconstruct are byte-reproducible.")
    parser.add_argument("--config", type=Path, required=True, help="Experiment config JSON")
    parser.add_argument("--workdir", type=Path, default=Path("output/determinism"), help="Scratch directory")

    args = parser.parse_args()
    sys.exit(0 if check(args.config, args.workdir) else 1)
