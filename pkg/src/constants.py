from pathlib import Path

PROJECT_FOLDER = Path(__file__).resolve().parent.parent

# Define paths
PRESETS_DIR = PROJECT_FOLDER / "presets"
OUTPUT_DIR = PROJECT_FOLDER / "output"

FIGURE_PRESETS = ("fig4", "fig5", "fig6", "fig7")

# Thread cap for the per-frequency spectrum solves
THREADS_ENV_VAR = "POLARITON_LAB_THREADS"
DEFAULT_MAX_THREADS = 4

# Truncations
DEFAULT_N_TRUNC = 15
MIN_N_TRUNC = 3

# Largest admissible Liouvillian side (dim**2 rows)
MAX_LIOUVILLIAN_SIZE = 250_000

# Tolerances
HERMITIAN_TOL = 1e-12
CLOSED_FORM_TOL = 1e-7  # relative, on every denominator of the root formulas
IMAG_RESIDUE_TOL = 1e-9
EIGEN_RESIDUAL_TOL = 1e-8
CROSS_CHECK_TOL = 1e-10
COMMUTATOR_TOL = 1e-10
PHASE_FIX_TOL = 1e-10
STEADY_STATE_TOL = 1e-10
BRANCH_AMBIGUITY_TOL = 1e-3
CONVERGENCE_DRIFT_TOL = 1e-6
