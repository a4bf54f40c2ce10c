import contextlib
import io
import json
import math
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

import config
import main as cli
from src.errors import DataFormatError, DimensionError
from src.experiment import cmd_analyze, dump_config, load_config, parse_config
from src.fock import apply_loss, fidelity, fock_state, photon_statistics
from src.homodyne import chi_square_against, marginal_histogram, predicted_marginal
from src.ingestion import read_density_matrix, read_jsi, read_records
from src.output_writer import write_density_matrix, write_jsi, write_spectrum
from src.spectral import gaussian_jsi, gaussian_jsi_purity, gaussian_spectrum
from src.wigner import wigner_grid

CONFIGS = config.CONFIGS_DIR


def run_cli(*argv) -> int:
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return cli.main([str(a) for a in argv])


def run_cli_stdout(*argv):
    buffer = io.StringIO()
    with contextlib.redirect_stdout(buffer), contextlib.redirect_stderr(io.StringIO()):
        code = cli.main([str(a) for a in argv])
    return code, buffer.getvalue()


def write_config(folder: Path, name: str, base: str, **changes) -> Path:
    """Copy of a shipped config with dotted-path changes, e.g. run__n_samples=500."""
    document = json.loads((CONFIGS / base).read_text(encoding="utf-8"))
    for key, value in changes.items():
        section, field = key.split("__")
        document[section][field] = value
    path = folder / name
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


class TestSinglePhotonPipeline(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        cfg = CONFIGS / "single_photon.json"
        cls.records = cls.root / "records.jsonl"
        assert run_cli("simulate", "--config", cfg, "--out", cls.records) == 0
        assert run_cli("reconstruct", "--in", cls.records, "--config", cfg, "--out", cls.root / "raw.json") == 0
        assert run_cli(
            "reconstruct", "--in", cls.records, "--config", cfg, "--eta", 0.85, "--out", cls.root / "corrected.json"
        ) == 0
        assert run_cli("predict", "--config", cfg, "--out", cls.root / "prediction") == 0
        cls.prediction = json.loads((cls.root / "prediction" / "prediction.json").read_text(encoding="utf-8"))

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def test_records_and_header(self):
        dataset, header = read_records(self.records)
        self.assertEqual(len(dataset), 100_000)
        self.assertEqual(header["herald_clicks"], 1)
        self.assertTrue(np.all(dataset.clicks == 1))
        self.assertTrue(np.all(np.diff(dataset.pulse) > 0))
        self.assertLess(abs(header["herald_rate_hz"] / 1.8e5 - 1.0), 0.5)

    def test_uncorrected_photon_statistics(self):
        probs = photon_statistics(read_density_matrix(self.root / "raw.json"))
        self.assertLess(abs(probs[1] - 0.545), 0.02)
        self.assertLess(probs.tail(2), 0.02)

    def test_corrected_wigner_negativity(self):
        report = json.loads((self.root / "corrected_report.json").read_text(encoding="utf-8"))
        predicted = self.prediction["wigner_origin_signal"]
        self.assertLess(abs(predicted + 0.095), 0.012)
        self.assertLess(abs(report["wigner_origin"] - predicted), 0.012)
        self.assertLess(abs(report["wigner_origin"] + 0.095), 0.012)
        self.assertLess(report["wigner_origin"], 0.0)

    def test_iteration_count_matches_convergence_flag(self):
        for name in ("raw_report.json", "corrected_report.json"):
            report = json.loads((self.root / name).read_text(encoding="utf-8"))
            max_iters = report["options"]["max_iters"]
            with self.subTest(report=name):
                if report["converged"]:
                    self.assertLessEqual(report["iterations"], max_iters)
                else:
                    self.assertEqual(report["iterations"], max_iters)

    def test_loglik_trace_is_monotone(self):
        report = json.loads((self.root / "raw_report.json").read_text(encoding="utf-8"))
        self.assertTrue(np.all(np.diff(report["loglik_trace"]) >= -1e-9))

    def test_records_histogram(self):
        table = np.loadtxt(self.root / "raw_histogram.csv", delimiter=",", skiprows=1)
        self.assertEqual(table.shape, (config.HISTOGRAM_BINS, 4))
        self.assertEqual(int(table[:, 2].sum()), 100_000)

    def test_audit_report(self):
        audit = json.loads((self.root / config.AUDIT_REPORT_NAME).read_text(encoding="utf-8"))
        self.assertEqual(audit["summary"]["failed"], 0)
        self.assertGreaterEqual(audit["summary"]["total_stages"], 2)

    def test_analyze_against_itself(self):
        out = self.root / "analysis"
        state = self.root / "raw.json"
        self.assertEqual(run_cli("analyze", "--in", state, "--reference", state, "--out", out), 0)
        analysis = json.loads((out / "analysis.json").read_text(encoding="utf-8"))
        self.assertAlmostEqual(analysis["fidelity"], 1.0, places=6)
        for name in ("marginal.csv", "wigner.csv", "wigner_p0.csv", "wigner_x0.csv"):
            self.assertTrue((out / name).is_file(), name)


class TestTwoPhotonPipeline(unittest.TestCase):
    def test_marginal_and_corrected_wigner(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            cfg = CONFIGS / "two_photon.json"
            records = root / "records.jsonl"
            self.assertEqual(run_cli("simulate", "--config", cfg, "--out", records), 0)
            self.assertEqual(run_cli("reconstruct", "--in", records, "--config", cfg, "--out", root / "rho.json"), 0)
            self.assertEqual(run_cli("predict", "--config", cfg, "--out", root / "prediction"), 0)

            dataset, _ = read_records(records)
            self.assertEqual(len(dataset), 60_000)
            # Bin edges on digitizer level boundaries, eight levels per bin
            edges = np.arange(-5.0, 5.0 + 1e-9, 8 * 10.0 / 256)
            fine = np.linspace(-8.0, 8.0, 16001)
            model_cdf = cumulative_trapezoid(predicted_marginal(2, 0.545, fine), fine, initial=0.0)
            _, p_value, dof = chi_square_against(
                marginal_histogram(dataset, edges), lambda points: np.interp(points, fine, model_cdf)
            )
            self.assertGreater(dof, 10)
            self.assertGreater(p_value, 0.01)

            report = json.loads((root / "rho_report.json").read_text(encoding="utf-8"))
            prediction = json.loads((root / "prediction" / "prediction.json").read_text(encoding="utf-8"))
            self.assertLess(abs(report["wigner_origin"] - prediction["wigner_origin_signal"]), 0.02)

            # W(0,0) stays positive at this loss but a negative ring survives
            axis = np.linspace(-4.0, 4.0, 81)
            grid = wigner_grid(read_density_matrix(root / "rho.json"), axis, axis)
            self.assertLess(grid.values.min(), -0.005)


class TestThreePhotonPipeline(unittest.TestCase):
    def test_fidelity_with_prediction(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            cfg = CONFIGS / "three_photon.json"
            records = root / "records.jsonl"
            code, stdout = run_cli_stdout("predict", "--config", cfg, "--out", root / "prediction")
            self.assertEqual(code, 0)
            rates = json.loads(stdout)["rates_hz"]
            self.assertEqual(sorted(rates), ["1", "2", "3"])

            self.assertEqual(run_cli("simulate", "--config", cfg, "--out", records), 0)
            self.assertEqual(run_cli("reconstruct", "--in", records, "--config", cfg, "--out", root / "rho.json"), 0)
            reference = root / "prediction" / "predicted_rho.json"
            out = root / "analysis"
            self.assertEqual(
                run_cli("analyze", "--in", root / "rho.json", "--reference", reference, "--out", out), 0
            )
            analysis = json.loads((out / "analysis.json").read_text(encoding="utf-8"))
            self.assertGreaterEqual(analysis["fidelity"], 0.99)
            self.assertGreaterEqual(
                fidelity(read_density_matrix(root / "rho.json"), read_density_matrix(reference)), 0.99
            )


class TestDeterminism(unittest.TestCase):
    def test_byte_identical_outputs(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            outputs = []
            for run, workers in (("a", 1), ("b", 3)):
                cfg = write_config(
                    root, f"small_{run}.json", "single_photon.json",
                    run__n_samples=45_000, run__workers=workers, reconstruction__max_iters=200,
                )
                folder = root / run
                self.assertEqual(run_cli("simulate", "--config", cfg, "--out", folder / "records.jsonl"), 0)
                self.assertEqual(
                    run_cli("reconstruct", "--in", folder / "records.jsonl", "--config", cfg,
                            "--out", folder / "rho.json"), 0
                )
                outputs.append(folder)
            for name in ("records.jsonl", "rho.json", "rho_report.json"):
                self.assertEqual((outputs[0] / name).read_bytes(), (outputs[1] / name).read_bytes(), name)

    def test_seed_override_changes_records(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            cfg = write_config(root, "small.json", "single_photon.json", run__n_samples=500)
            self.assertEqual(run_cli("simulate", "--config", cfg, "--out", root / "a.jsonl"), 0)
            self.assertEqual(run_cli("simulate", "--config", cfg, "--out", root / "b.jsonl", "--seed", 7), 0)
            _, header = read_records(root / "b.jsonl")
            self.assertEqual(header["seed"], 7)
            self.assertNotEqual((root / "a.jsonl").read_bytes(), (root / "b.jsonl").read_bytes())


class TestConfig(unittest.TestCase):
    def test_round_trip(self):
        for name in ("single_photon.json", "two_photon.json", "three_photon.json"):
            cfg = load_config(CONFIGS / name)
            self.assertEqual(parse_config(dump_config(cfg)), cfg)
            self.assertEqual(parse_config(json.loads(json.dumps(dump_config(cfg)))), cfg)

    def test_shipped_efficiency(self):
        cfg = load_config(CONFIGS / "two_photon.json")
        self.assertAlmostEqual(cfg.overall_efficiency, 0.85 * 0.66 * 0.97, places=12)


class TestExitCodes(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_degenerate_herald_is_numerical_failure(self):
        cfg = write_config(self.root, "dark.json", "single_photon.json", source__lambda=0.0)
        self.assertEqual(run_cli("simulate", "--config", cfg, "--out", self.root / "r.jsonl"), 3)
        audit = json.loads((self.root / config.AUDIT_REPORT_NAME).read_text(encoding="utf-8"))
        self.assertEqual(audit["summary"]["failed"], 1)

    def test_unknown_key(self):
        cfg = write_config(self.root, "typo.json", "single_photon.json", detector__eta_apd=0.45)
        self.assertEqual(run_cli("simulate", "--config", cfg, "--out", self.root / "r.jsonl"), 2)

    def test_out_of_range_value(self):
        cfg = write_config(self.root, "bad.json", "single_photon.json", detector__eta_det=1.5)
        self.assertEqual(run_cli("simulate", "--config", cfg, "--out", self.root / "r.jsonl"), 2)

    def test_herald_beyond_detectors(self):
        cfg = write_config(self.root, "bad.json", "single_photon.json", herald__clicks=2)
        self.assertEqual(run_cli("predict", "--config", cfg, "--out", self.root / "p"), 2)

    def test_bad_override(self):
        records = self.root / "r.jsonl"
        records.write_text('{"x": 0.1, "theta": 0.0, "clicks": 1, "pulse": 0}\n', encoding="utf-8")
        self.assertEqual(run_cli("reconstruct", "--in", records, "--eta", 0.2, "--out", self.root / "rho.json"), 2)

    def test_missing_file(self):
        missing = self.root / "missing.json"
        self.assertEqual(run_cli("simulate", "--config", missing, "--out", self.root / "r.jsonl"), 4)

    def test_reference_dimension_mismatch(self):
        state = write_density_matrix(apply_loss(fock_state(2, 3), 0.8), self.root / "rho.json")
        reference = write_density_matrix(fock_state(2, 4), self.root / "ref.json")
        with self.assertRaises(DimensionError):
            cmd_analyze(state, self.root / "analysis", reference=str(reference))
        code = run_cli("analyze", "--in", state, "--reference", reference, "--out", self.root / "analysis")
        self.assertEqual(code, 2)

    def test_malformed_records(self):
        records = self.root / "r.jsonl"
        records.write_text('{"x": 0.1, "theta": 0.0}\n', encoding="utf-8")
        self.assertEqual(run_cli("reconstruct", "--in", records, "--out", self.root / "rho.json"), 4)


class TestPredictAndPovm(unittest.TestCase):
    def test_vacuum_prediction(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            cfg = write_config(root, "vac.json", "single_photon.json", source__lambda=0.0, herald__clicks=0)
            code, stdout = run_cli_stdout("predict", "--config", cfg, "--out", root / "p")
            self.assertEqual(code, 0)
            prediction = json.loads(stdout)
            self.assertAlmostEqual(prediction["herald_probability"], 1.0, places=12)
            self.assertEqual(prediction["signal_photon_probs"][0], 1.0)
            self.assertAlmostEqual(prediction["wigner_origin_detected"], 1.0 / math.pi, places=12)
            self.assertTrue((root / "p" / "predicted_marginal.csv").is_file())

    def test_povm_columns_are_distributions(self):
        code, stdout = run_cli_stdout("povm", "--n-max", 6, "--format", "json")
        self.assertEqual(code, 0)
        table = np.array(json.loads(stdout)["table"])
        self.assertEqual(table.shape, (4, 7))
        np.testing.assert_allclose(table.sum(axis=0), 1.0, atol=1e-12)

    def test_povm_csv(self):
        code, stdout = run_cli_stdout("povm", "--config", CONFIGS / "single_photon.json", "--n-max", 3, "--format", "csv")
        self.assertEqual(code, 0)
        lines = stdout.strip().splitlines()
        self.assertEqual(lines[0], "k,n0,n1,n2,n3")
        self.assertEqual(len(lines), 3)


class TestSpectraAnalysis(unittest.TestCase):
    def test_budget_from_spectra(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            grid = np.linspace(770.0, 830.0, 6001)
            write_spectrum(gaussian_spectrum(grid, 800.0, 8.0), root / "lo.csv")
            write_spectrum(gaussian_spectrum(grid, 800.0, 4.0), root / "signal.csv")
            axis = np.linspace(-12.0, 12.0, 161)
            write_jsi(gaussian_jsi(axis, axis, sigma_plus=1.0, sigma_minus=2.0), root / "jsi.csv")
            out = root / "budget.json"
            code = run_cli(
                "analyze-spectra", "--lo", root / "lo.csv", "--signal", root / "signal.csv",
                "--jsi", root / "jsi.csv", "--visibility", 0.8, "--out", out,
            )
            self.assertEqual(code, 0)
            result = json.loads(out.read_text(encoding="utf-8"))
            self.assertAlmostEqual(result["spectral_overlap"], 0.8, delta=1e-4)
            self.assertAlmostEqual(result["schmidt"]["purity"], gaussian_jsi_purity(1.0, 2.0), delta=0.01)
            self.assertAlmostEqual(result["budget"]["eta_mm"], 0.64, places=12)

    def test_dark_count_factor_enters_budget(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "budget.json"
            code = run_cli("analyze-spectra", "--visibility", 0.8, "--eta-dc", 0.9, "--out", out)
            self.assertEqual(code, 0)
            result = json.loads(out.read_text(encoding="utf-8"))
            budget = result["budget"]
            self.assertEqual(budget["eta_dc"], 0.9)
            self.assertAlmostEqual(
                result["overall_efficiency"],
                budget["eta_bhd"] * budget["eta_mm"] * budget["eta_p"] * 0.9,
                places=12,
            )


class TestReaders(unittest.TestCase):
    def test_header_must_come_first(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "r.jsonl"
            path.write_text(
                '{"x": 0.1, "theta": 0.0, "clicks": 1, "pulse": 0}\n{"header": {}}\n', encoding="utf-8"
            )
            with self.assertRaises(DataFormatError):
                read_records(path)

    def test_phase_range(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "r.jsonl"
            path.write_text('{"x": 0.1, "theta": 7.0, "clicks": 1, "pulse": 0}\n', encoding="utf-8")
            with self.assertRaises(DataFormatError):
                read_records(path)

    def test_jsi_needs_a_grid(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "jsi.csv"
            path.write_text(",800.0\n800.0,1.0\n", encoding="utf-8")
            with self.assertRaises(DataFormatError):
                read_jsi(path)


if __name__ == "__main__":
    unittest.main()
