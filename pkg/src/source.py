"""
Heralded Fock Tomography – Source Module

Models the pulsed two-mode squeezed vacuum source, the spatially multiplexed
click detector in the trigger arm, heralded preparation of the signal mode
and the resulting production rates.

Click statistics use classical multinomial routing of the trigger photons
through the splitter tree: for click detectors (POVMs diagonal in each
output's number basis) this reproduces the beam-splitter quantum statistics
exactly.
"""
import itertools
import logging
from typing import Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

import config
from src.errors import DegenerateHeraldError, ParameterError
from src.fock import DensityMatrix, diagonal_state
from src.utils import derive_seed

logger = logging.getLogger(__name__)


# ── Domain types ──────────────────────────────────────────────────────────────

class TmsvSource(BaseModel):
    """Two-mode squeezed vacuum Σ λⁿ|n,n⟩ truncated at n_max photon pairs."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    lam: float = Field(
        alias="lambda", ge=0.0, lt=1.0, description="Squeezing parameter λ for the collected modes"
    )
    n_max: int = Field(
        default=config.DEFAULT_DIM - 1, ge=0, description="Largest photon-pair number kept"
    )


class ClickDetector(BaseModel):
    """
    Spatially multiplexed detector: a splitter tree routing each photon to
    detector i with probability bin_probs[i], identical APD efficiencies, a
    per-pulse dark-click probability per APD and a trigger-arm transmission
    upstream of the tree.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    bin_probs: List[float] = Field(
        default_factory=lambda: list(config.SMD_BIN_PROBS),
        min_length=1,
        description="Routing probability to each APD",
    )
    eta_det: float = Field(default=config.ETA_APD, ge=0.0, le=1.0, description="APD quantum efficiency")
    dark_prob: float = Field(default=config.DARK_PROB, ge=0.0, le=1.0, description="Dark click probability per pulse")
    coupling: float = Field(default=config.TRIGGER_COUPLING, ge=0.0, le=1.0, description="Trigger-arm transmission")

    @field_validator("bin_probs")
    @classmethod
    def _check_bins(cls, value: List[float]) -> List[float]:
        if any(q < 0.0 or q > 1.0 for q in value):
            raise ValueError("bin probabilities must lie in [0, 1]")
        if abs(sum(value) - 1.0) > 1e-12:
            raise ValueError(f"bin probabilities sum to {sum(value)!r}, expected 1")
        return value

    @property
    def n_detectors(self) -> int:
        return len(self.bin_probs)

    @classmethod
    def single_apd(cls, **overrides) -> "ClickDetector":
        """One APD, as used to herald the single-photon state."""
        return cls(bin_probs=[1.0], **overrides)

    @classmethod
    def cascaded_smd(cls, **overrides) -> "ClickDetector":
        """Three APDs behind two 50:50 splitters."""
        return cls(bin_probs=list(config.SMD_BIN_PROBS), **overrides)


class HeraldSpec(BaseModel):
    """Herald on exactly `clicks` detector clicks."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    clicks: int = Field(ge=0, description="Required click count (exactly-k)")


class HeraldOutcome(BaseModel):
    """Signal state conditioned on the herald, before signal-arm losses."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    state: DensityMatrix
    probability: float = Field(description="Unconditional herald probability per pulse")


# ── Source ────────────────────────────────────────────────────────────────────

def joint_pair_distribution(src: TmsvSource) -> np.ndarray:
    """P(n pairs) ∝ λ^(2n), normalized over n ≤ n_max."""
    weights = np.array([src.lam ** (2 * n) for n in range(src.n_max + 1)], dtype=np.float64)
    return weights / weights.sum()


# ── Click detector ────────────────────────────────────────────────────────────

def _check_pattern(det: ClickDetector, pattern: Iterable[int]) -> frozenset:
    pattern = frozenset(int(i) for i in pattern)
    bad = [i for i in pattern if not 0 <= i < det.n_detectors]
    if bad:
        raise ParameterError(f"pattern indices {sorted(bad)} outside 0…{det.n_detectors - 1}")
    return pattern


def _silent_probability(det: ClickDetector, n: int, silent: Iterable[int]) -> float:
    """P(no detector in *silent* clicks | n photons enter the tree)."""
    silent = tuple(silent)
    reach = det.coupling * det.eta_det * sum(det.bin_probs[i] for i in silent)
    return (1.0 - reach) ** n * (1.0 - det.dark_prob) ** len(silent)


def click_pattern_probability(det: ClickDetector, n: int, pattern: Iterable[int]) -> float:
    """
    Probability that exactly the detectors in *pattern* click for n photons.

    Inclusion–exclusion over the clicking set C with complement Z:
    P(C) = Σ_{T ⊆ C} (−1)^|T| P(no click in Z ∪ T).
    """
    if n < 0:
        raise ParameterError(f"photon number must be non-negative, got {n}")
    clicking = _check_pattern(det, pattern)
    quiet = [i for i in range(det.n_detectors) if i not in clicking]
    total = 0.0
    ordered = sorted(clicking)
    for size in range(len(ordered) + 1):
        sign = -1.0 if size % 2 else 1.0
        for subset in itertools.combinations(ordered, size):
            total += sign * _silent_probability(det, n, quiet + list(subset))
    return max(0.0, total)


def click_count_probability(det: ClickDetector, n: int) -> np.ndarray:
    """P(k clicks | n photons) for k = 0 … N_det."""
    probs = np.zeros(det.n_detectors + 1, dtype=np.float64)
    for k in range(det.n_detectors + 1):
        for pattern in itertools.combinations(range(det.n_detectors), k):
            probs[k] += click_pattern_probability(det, n, pattern)
    return probs


def click_count_table(det: ClickDetector, n_max: int) -> np.ndarray:
    """POVM table p(k|n), shape (N_det + 1, n_max + 1); columns sum to 1."""
    return np.column_stack([click_count_probability(det, n) for n in range(n_max + 1)])


def smd_povm(det: ClickDetector, k: int, n_max: int) -> np.ndarray:
    """Diagonal POVM weights p(k|n) of the k-click outcome for n = 0 … n_max."""
    if not 0 <= k <= det.n_detectors:
        raise ParameterError(f"click count {k} outside 0…{det.n_detectors}")
    return click_count_table(det, n_max)[k]


# ── Heralding ─────────────────────────────────────────────────────────────────

def heralded_state(src: TmsvSource, det: ClickDetector, herald: HeraldSpec) -> HeraldOutcome:
    """
    Signal state after a k-click herald: ρ_s ∝ Σ_n P(n) p(k|n) |n⟩⟨n|.

    The state carries no signal-arm loss; callers apply it separately.
    """
    if herald.clicks > det.n_detectors:
        raise ParameterError(
            f"herald on {herald.clicks} clicks needs at least that many detectors, have {det.n_detectors}"
        )
    weights = joint_pair_distribution(src) * smd_povm(det, herald.clicks, src.n_max)
    probability = float(weights.sum())
    if probability < config.DEGENERATE_HERALD_PROB:
        raise DegenerateHeraldError(
            f"herald on {herald.clicks} click(s) has probability {probability:.3e} per pulse"
        )
    logger.debug("Herald k=%d: probability %.4e per pulse", herald.clicks, probability)
    return HeraldOutcome(state=diagonal_state(weights / probability), probability=probability)


def herald_probability(src: TmsvSource, det: ClickDetector, herald: HeraldSpec) -> float:
    """Unconditional herald probability per pulse; zero for impossible heralds."""
    if herald.clicks > det.n_detectors:
        return 0.0
    return float(joint_pair_distribution(src) @ smd_povm(det, herald.clicks, src.n_max))


def herald_rate(src: TmsvSource, det: ClickDetector, herald: HeraldSpec, rep_rate: float) -> float:
    """Heralding events per second at pulse repetition rate *rep_rate*."""
    if not rep_rate > 0.0:
        raise ParameterError(f"repetition rate must be positive, got {rep_rate}")
    return herald_probability(src, det, herald) * rep_rate


def rate_table(src: TmsvSource, det: ClickDetector, rep_rate: float) -> dict:
    """Herald rates for every non-zero click count the detector can report."""
    return {
        k: herald_rate(src, det, HeraldSpec(clicks=k), rep_rate)
        for k in range(1, det.n_detectors + 1)
    }


# ── Pulse-level Monte Carlo ───────────────────────────────────────────────────

def simulate_herald_pulses(
    src: TmsvSource,
    det: ClickDetector,
    n_pulses: int,
    seed: int,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Simulates *n_pulses* pulses photon by photon.

    Each pulse draws a pair number, routes every trigger photon through the
    coupling loss and the splitter tree, applies APD efficiency and adds
    independent dark clicks.

    Returns:
        (pair_numbers, click_counts), both integer arrays of length n_pulses.
    """
    if n_pulses <= 0:
        raise ParameterError(f"pulse count must be positive, got {n_pulses}")
    rng = rng or np.random.default_rng(derive_seed(seed, "herald-pulses"))
    pairs = rng.choice(src.n_max + 1, size=n_pulses, p=joint_pair_distribution(src))

    n_det = det.n_detectors
    # Per-photon outcome: index i < n_det means detected on APD i, n_det means lost.
    reach = det.coupling * det.eta_det * np.asarray(det.bin_probs, dtype=np.float64)
    outcome_probs = np.append(reach, max(0.0, 1.0 - reach.sum()))
    hits = np.zeros((n_pulses, n_det), dtype=bool)
    for count in np.unique(pairs):
        if count == 0:
            continue
        rows = np.flatnonzero(pairs == count)
        routed = rng.multinomial(int(count), outcome_probs, size=rows.size)
        hits[rows] = routed[:, :n_det] > 0
    if det.dark_prob > 0.0:
        hits |= rng.random((n_pulses, n_det)) < det.dark_prob
    return pairs, hits.sum(axis=1)
