"""
SubsampledRDP — Settings
Numerical knobs shared by the accountant, the bounds and the verifier.
Every value can be overridden from the environment or a local .env file.
"""

import os

from dotenv import load_dotenv

load_dotenv()


def _float(name: str, default: str) -> float:
    return float(os.getenv(name, default))


def _int(name: str, default: str) -> int:
    return int(os.getenv(name, default))


# ── Amplification ────────────────────────────────────────────────────────────
ALPHA_THRESH = _int("RDP_ALPHA_THRESH", "256")
CANCELLATION_FLOOR = _float("RDP_CANCELLATION_FLOOR", "1e-12")

# ── Accountant ───────────────────────────────────────────────────────────────
LAMBDA_CAP = _float("RDP_LAMBDA_CAP", str(2.0**40))
SOLVER_TOL = _float("RDP_SOLVER_TOL", "1e-10")
GRID_SIZE = _int("RDP_GRID_SIZE", "512")
GRID_LAMBDA_MIN = _float("RDP_GRID_LAMBDA_MIN", "1e-4")
GRID_LAMBDA_MAX = _float("RDP_GRID_LAMBDA_MAX", str(2.0**20))

# ── Baselines ────────────────────────────────────────────────────────────────
BASELINE_CANDIDATES = _int("RDP_BASELINE_CANDIDATES", "40")

# ── Verifier (quadrature oracle) ─────────────────────────────────────────────
QUAD_EPSABS = _float("RDP_QUAD_EPSABS", "1e-12")
QUAD_EPSREL = _float("RDP_QUAD_EPSREL", "1e-10")
QUAD_LIMIT = _int("RDP_QUAD_LIMIT", "500")
QUAD_WINDOW = _float("RDP_QUAD_WINDOW", "40")
QUAD_TAIL_MASS = _float("RDP_QUAD_TAIL_MASS", "1e-12")
SANDWICH_ATOL = _float("RDP_SANDWICH_ATOL", "1e-13")
SANDWICH_RTOL = _float("RDP_SANDWICH_RTOL", "1e-9")

# ── Output ───────────────────────────────────────────────────────────────────
SIGNIFICANT_DIGITS = _int("RDP_SIGNIFICANT_DIGITS", "12")
