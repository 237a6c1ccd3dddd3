"""
Default settings for magnet
Values can be overridden with MAGNET_* variables in the environment or a .env file
"""
import os

from dotenv import load_dotenv

load_dotenv()

__version__ = "1.0.0"
FORMAT_SCHEMA_VERSION = 1


def _env(name, default, cast=float):
    value = os.getenv(f"MAGNET_{name}")
    if value is None or value == "":
        return default
    return cast(value)


# ============================================
# CONFIGURATION
# ============================================

# Solver
EPSILON = _env("EPSILON", 1e-3)
MAX_SWEEPS = _env("MAX_SWEEPS", 500, int)
INITIAL_STEP = _env("INITIAL_STEP", 1.0)
MIN_STEP = _env("MIN_STEP", 1e-10)
KKT_TOL = _env("KKT_TOL", 1e-4)
DESCENT_TOL = 1e-12
SYMMETRY_TOL = 1e-12
FALLBACK_REL_CHANGE = 1e-8
MAX_DELTA_DOUBLINGS = 50
# gap counts as stalled when it shrank by less than 1% over this many sweeps
GAP_STALL_SWEEPS = 10
GAP_STALL_RATIO = 0.99

# Model selection
GRID_SIZE = _env("GRID_SIZE", 30, int)
GRID_RATIO = 100.0
STABILITY_REPS = _env("STABILITY_REPS", 100, int)
STABILITY_FRACTION = _env("STABILITY_FRACTION", 0.8)
STABILITY_THRESHOLD = _env("STABILITY_THRESHOLD", 95, int)
STABILITY_MAX_FAILED = 0.10
REFIT_TOL = 1e-8
REFIT_MAX_ITER = 200

# Interpretation
CLASS_THRESHOLD = _env("CLASS_THRESHOLD", 0.25)

# Theory diagnostics
TAU = _env("TAU", 3.0)
GAMMA = _env("GAMMA", 0.5)
HESSIAN_MAX_DIM = 60

# Simulation / bench
COMPONENT_SIZE = 20
TARGET_MIN_EIGENVALUE = 0.5
BENCH_REPS = _env("BENCH_REPS", 20, int)
BENCH_THETAS = (1.0, 2.0, 4.0, 8.0, 13.0, 16.0)

# Runtime
SEED = _env("SEED", 0, int)
JOBS = _env("JOBS", 1, int)
