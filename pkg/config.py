"""
Heralded Fock Tomography – Central Configuration
"""
from pathlib import Path

# ── Paths ────────────────────────────────────────────────────────────────────
BASE_DIR = Path(__file__).parent
CONFIGS_DIR = BASE_DIR / "configs"
OUTPUT_DIR = BASE_DIR / "output"

# ── Fock space ───────────────────────────────────────────────────────────────
# Truncation used for the shipped experiments (max herald is 3 photons and
# λ ≤ 0.087 keeps P(n ≥ 12) below 1e-20).
DEFAULT_DIM = 12

# Tolerances on density-matrix invariants
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

# Eigenvalues below this are treated as exact zeros inside matrix square roots
SQRT_EIGEN_FLOOR = 1e-14

# ── Source (two-mode squeezed vacuum) ────────────────────────────────────────
LAMBDA_LOW_GAIN = 0.071     # one- and two-photon runs
LAMBDA_HIGH_GAIN = 0.087    # three-photon run, full pump power
REP_RATE_HZ = 80e6

# ── Trigger detector (spatially multiplexed) ─────────────────────────────────
# One 50:50 splitter feeding an APD and a second 50:50 splitter.
SMD_BIN_PROBS = (0.5, 0.25, 0.25)
ETA_APD = 0.45
TRIGGER_COUPLING = 0.65
DARK_PROB = 0.0

# Herald probabilities below this are treated as impossible events
DEGENERATE_HERALD_PROB = 1e-300

# ── Efficiency budget ────────────────────────────────────────────────────────
ETA_BHD = 0.85
ETA_MM = 0.66
ETA_P = 0.97
ETA_DC = 1.0

# ── Balanced homodyne detector ───────────────────────────────────────────────
ELEC_NOISE_SIGMA = 0.0
ADC_BITS = 8
ADC_FULL_SCALE = 5.0

# ── Quadrature sampling ──────────────────────────────────────────────────────
SAMPLING_GRID_POINTS = 8001
SAMPLING_BLOCK_SIZE = 20_000
PHASE_STEPS = 1024
SAMPLING_TAIL_TOL = 1e-6

# ── Maximum-likelihood reconstruction ────────────────────────────────────────
MLE_MAX_ITERS = 5000
MLE_TOL = 1e-8
MLE_BINS = 200
MLE_MIN_ETA_CORRECTION = 0.5
MLE_PROB_FLOOR = 1e-12
MLE_LOGLIK_SLACK = 1e-9
MLE_MAX_DILUTION_HALVINGS = 30
MLE_BIN_QUAD_NODES = 4
# Data on a uniform lattice with at most this fraction of distinct values
# are treated as digitized and binned one bin per occupied level
MLE_DIGITIZED_MAX_DISTINCT = 0.5
MLE_LATTICE_TOL = 1e-6

# ── Wigner function ──────────────────────────────────────────────────────────
WIGNER_EXTENT = 6.0
WIGNER_POINTS = 121

# ── Parallelism ──────────────────────────────────────────────────────────────
DEFAULT_WORKERS = 2

# ── Output options ───────────────────────────────────────────────────────────
MARGINAL_EXTENT = 5.0
MARGINAL_POINTS = 201
HISTOGRAM_BINS = 64
AUDIT_REPORT_NAME = "audit_report.json"
