import itertools
import sys
import unittest
from pathlib import Path

import numpy as np

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from pydantic import ValidationError

from src.errors import DegenerateHeraldError, ParameterError
from src.fock import photon_statistics
from src.source import (
    ClickDetector,
    HeraldSpec,
    TmsvSource,
    click_count_probability,
    click_count_table,
    click_pattern_probability,
    herald_probability,
    herald_rate,
    heralded_state,
    joint_pair_distribution,
    rate_table,
    simulate_herald_pulses,
    smd_povm,
)

REP_RATE = 80e6


def enumerate_patterns(det: ClickDetector, n: int) -> dict:
    """
    Exhaustive oracle: every photon independently ends up lost or on one
    APD, every APD independently fires a dark click.
    """
    n_det = det.n_detectors
    reach = [det.coupling * det.eta_det * q for q in det.bin_probs]
    outcomes = list(range(n_det)) + [None]
    weights = reach + [1.0 - sum(reach)]
    table = {}
    for path in itertools.product(range(n_det + 1), repeat=n):
        p_path = 1.0
        hit = set()
        for choice in path:
            p_path *= weights[choice]
            if outcomes[choice] is not None:
                hit.add(outcomes[choice])
        for dark in itertools.product((False, True), repeat=n_det):
            p_dark = 1.0
            fired = set(hit)
            for i, on in enumerate(dark):
                p_dark *= det.dark_prob if on else 1.0 - det.dark_prob
                if on:
                    fired.add(i)
            key = frozenset(fired)
            table[key] = table.get(key, 0.0) + p_path * p_dark
    return table


class TestSmdPovm(unittest.TestCase):
    def test_matches_enumeration(self):
        for eta in (0.45, 1.0):
            for dark in (0.0, 1e-3):
                for coupling in (1.0, 0.65):
                    det = ClickDetector(bin_probs=[0.5, 0.25, 0.25], eta_det=eta, dark_prob=dark, coupling=coupling)
                    for n in range(7):
                        oracle = enumerate_patterns(det, n)
                        for size in range(4):
                            for pattern in itertools.combinations(range(3), size):
                                expected = oracle.get(frozenset(pattern), 0.0)
                                got = click_pattern_probability(det, n, pattern)
                                self.assertLess(abs(got - expected), 1e-12, (eta, dark, coupling, n, pattern))

    def test_three_photons_all_click(self):
        det = ClickDetector.cascaded_smd(eta_det=1.0, coupling=1.0)
        self.assertAlmostEqual(click_count_probability(det, 3)[3], 0.1875, places=12)

    def test_two_photons(self):
        det = ClickDetector(bin_probs=[0.5, 0.25, 0.25], eta_det=1.0, coupling=1.0)
        probs = click_count_probability(det, 2)
        self.assertAlmostEqual(probs[1], 0.375, places=12)
        self.assertAlmostEqual(probs[2], 0.625, places=12)

    def test_vacuum_never_clicks_without_dark_counts(self):
        det = ClickDetector()
        self.assertEqual(smd_povm(det, 0, 4)[0], 1.0)
        self.assertEqual(smd_povm(det, 1, 4)[0], 0.0)

    def test_no_click_probability_falls_with_photon_number(self):
        det = ClickDetector(dark_prob=0.0)
        no_click = [click_count_probability(det, n)[0] for n in range(9)]
        self.assertEqual(no_click[0], 1.0)
        for fewer, more in zip(no_click, no_click[1:]):
            self.assertLessEqual(more, fewer)

    def test_table_columns_sum_to_one(self):
        det = ClickDetector(dark_prob=1e-3)
        table = click_count_table(det, 8)
        self.assertEqual(table.shape, (4, 9))
        np.testing.assert_allclose(table.sum(axis=0), 1.0, atol=1e-12)

    def test_bin_probabilities_validated(self):
        with self.assertRaises(ValidationError):
            ClickDetector(bin_probs=[0.5, 0.4])
        with self.assertRaises(ParameterError):
            click_pattern_probability(ClickDetector(), 1, [5])
        with self.assertRaises(ParameterError):
            smd_povm(ClickDetector(), 4, 3)


class TestHeralding(unittest.TestCase):
    def test_pair_distribution(self):
        probs = joint_pair_distribution(TmsvSource(lam=0.5, n_max=30))
        self.assertAlmostEqual(probs[1] / probs[0], 0.25, places=12)
        self.assertAlmostEqual(probs.sum(), 1.0, places=12)

    def test_lambda_alias(self):
        self.assertEqual(TmsvSource.model_validate({"lambda": 0.071}).lam, 0.071)

    def test_single_photon_herald_is_nearly_pure(self):
        outcome = heralded_state(TmsvSource(lam=0.071), ClickDetector(), HeraldSpec(clicks=1))
        self.assertGreater(photon_statistics(outcome.state)[1], 0.98)
        self.assertAlmostEqual(
            outcome.probability,
            herald_probability(TmsvSource(lam=0.071), ClickDetector(), HeraldSpec(clicks=1)),
            places=15,
        )

    def test_three_click_herald(self):
        outcome = heralded_state(TmsvSource(lam=0.087), ClickDetector(), HeraldSpec(clicks=3))
        stats = photon_statistics(outcome.state)
        self.assertLess(stats[0] + stats[1] + stats[2], 1e-12)
        self.assertGreater(stats[3], 0.95)
        self.assertLess(stats.tail(4), 0.05)

    def test_resolving_herald_selects_fock_state(self):
        # eight equal bins at unit efficiency keep every POVM weight exact
        det = ClickDetector(bin_probs=[0.125] * 8, eta_det=1.0, coupling=1.0)
        src = TmsvSource(lam=1e-4, n_max=6)
        for k in (1, 2, 3):
            with self.subTest(clicks=k):
                stats = photon_statistics(heralded_state(src, det, HeraldSpec(clicks=k)).state)
                self.assertGreater(stats[k], 1.0 - 1e-6)
                self.assertLess(sum(stats[n] for n in range(k)), 1e-15)

    def test_degenerate_herald(self):
        with self.assertRaises(DegenerateHeraldError):
            heralded_state(TmsvSource(lam=0.0), ClickDetector(), HeraldSpec(clicks=1))

    def test_herald_exceeding_detectors(self):
        with self.assertRaises(ParameterError):
            heralded_state(TmsvSource(lam=0.1), ClickDetector.single_apd(), HeraldSpec(clicks=2))
        self.assertEqual(herald_probability(TmsvSource(lam=0.1), ClickDetector.single_apd(), HeraldSpec(clicks=2)), 0.0)


class TestRates(unittest.TestCase):
    def test_rates_at_default_coupling(self):
        det = ClickDetector()
        r1 = herald_rate(TmsvSource(lam=0.071), det, HeraldSpec(clicks=1), REP_RATE)
        r2 = herald_rate(TmsvSource(lam=0.071), det, HeraldSpec(clicks=2), REP_RATE)
        r3 = herald_rate(TmsvSource(lam=0.087), det, HeraldSpec(clicks=3), REP_RATE)
        self.assertTrue(1.8e5 / 2 <= r1 <= 1.8e5 * 2, r1)
        self.assertTrue(200 / 3 <= r2 <= 200 * 3, r2)
        # three-click rate sits a factor ~6 below 1/s at this coupling
        self.assertTrue(1 / 10 <= r3 <= 10, r3)

    def test_rates_at_full_coupling(self):
        det = ClickDetector(coupling=1.0)
        r1 = herald_rate(TmsvSource(lam=0.071), det, HeraldSpec(clicks=1), REP_RATE)
        r2 = herald_rate(TmsvSource(lam=0.071), det, HeraldSpec(clicks=2), REP_RATE)
        r3 = herald_rate(TmsvSource(lam=0.087), det, HeraldSpec(clicks=3), REP_RATE)
        self.assertTrue(1.8e5 / 2 <= r1 <= 1.8e5 * 2, r1)
        self.assertTrue(200 / 3 <= r2 <= 200 * 3, r2)
        self.assertTrue(1 / 5 <= r3 <= 5, r3)

    def test_rate_table(self):
        table = rate_table(TmsvSource(lam=0.071), ClickDetector(), REP_RATE)
        self.assertEqual(sorted(table), [1, 2, 3])
        self.assertGreater(table[1], table[2])
        self.assertGreater(table[2], table[3])

    def test_rate_scales_with_rep_rate(self):
        src, det, herald = TmsvSource(lam=0.071), ClickDetector(), HeraldSpec(clicks=2)
        single = herald_rate(src, det, herald, REP_RATE)
        double = herald_rate(src, det, herald, 2 * REP_RATE)
        self.assertLess(abs(double - 2 * single), 1e-12 * abs(single))

    def test_rep_rate_positive(self):
        with self.assertRaises(ParameterError):
            herald_rate(TmsvSource(lam=0.071), ClickDetector(), HeraldSpec(clicks=1), 0.0)


class TestPulseMonteCarlo(unittest.TestCase):
    def test_click_frequencies_match_povm(self):
        src = TmsvSource(lam=0.4, n_max=20)
        det = ClickDetector(coupling=1.0, eta_det=0.6, dark_prob=1e-2)
        n = 200_000
        pairs, clicks = simulate_herald_pulses(src, det, n, seed=11)
        for k in range(4):
            p = herald_probability(src, det, HeraldSpec(clicks=k))
            sigma = np.sqrt(p * (1 - p) / n)
            self.assertLess(abs(np.mean(clicks == k) - p), 5 * sigma + 1e-9, k)

        outcome = heralded_state(src, det, HeraldSpec(clicks=2))
        selected = pairs[clicks == 2]
        for m in range(1, 4):
            p = photon_statistics(outcome.state)[m]
            sigma = np.sqrt(p * (1 - p) / selected.size)
            self.assertLess(abs(np.mean(selected == m) - p), 5 * sigma + 1e-9, m)

    def test_seeded(self):
        src, det = TmsvSource(lam=0.3), ClickDetector()
        a = simulate_herald_pulses(src, det, 1000, seed=5)
        b = simulate_herald_pulses(src, det, 1000, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


if __name__ == "__main__":
    unittest.main()
