"""
SubsampledRDP — Analytical Moments Accountant
Keeps the composed CGF symbolically: one ledger entry per distinct mechanism
with a multiplicity, so composing k identical rounds is a count update.
(ε, δ) answers are solved on demand by doubling then bisection over the
CGF order λ, and are never looser than the separately tracked pure-DP total.

A ledger has a single writer: compose() mutates in place and returns the
same ledger. Take copy() before handing it to concurrent readers.
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from absl import logging

from privacy import config
from privacy.amplification import SubsampledCurve
from privacy.mechanisms import RdpCurve, curve_from_spec

INF = math.inf

Curve = Union[RdpCurve, SubsampledCurve]

INFIMUM_LIMITED = "infimum-limited"
PURE_DP = "pure-dp"

_MAX_BISECTIONS = 400
_SLOPE_STEP = 1e-6


# ─── Result types ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class PrivacyParams:
    eps: float
    delta: float

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class Conversion:
    """Answer of an (ε, δ) query with the CGF order that attains it."""

    eps: float
    delta: float
    lambda_star: float
    flags: Tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "delta": self.delta,
            "lambda_star": self.lambda_star,
            "flags": list(self.flags),
        }


# ─── Ledger ───────────────────────────────────────────────────────────────────


class _ProjectedCgf:
    """Lower convex envelope of sampled CGF values, through the origin."""

    def __init__(self, lambdas: np.ndarray, values: np.ndarray):
        self.lambdas = lambdas
        self.values = values

    def __call__(self, lam: float) -> Optional[float]:
        if lam > self.lambdas[-1]:
            return None
        return float(np.interp(lam, self.lambdas, self.values))


class CgfLedger:
    def __init__(self):
        self._entries: Dict[tuple, List] = {}
        self.eps_inf_total = 0.0
        self.eps_kl_total = 0.0
        self._projection: Optional[_ProjectedCgf] = None

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> List[Tuple[Curve, int]]:
        return [(curve, count) for curve, count in self._entries.values()]

    @property
    def is_projected(self) -> bool:
        return self._projection is not None

    def copy(self) -> "CgfLedger":
        other = CgfLedger()
        other._entries = {key: list(entry) for key, entry in self._entries.items()}
        other.eps_inf_total = self.eps_inf_total
        other.eps_kl_total = self.eps_kl_total
        other._projection = self._projection
        return other

    def raw_cgf(self, lam: float) -> float:
        return math.fsum(count * curve.cgf(lam) for curve, count in self._entries.values())


def compose(ledger: CgfLedger, curve: Curve, count: int = 1) -> CgfLedger:
    """Add count rounds of curve; repeated identities merge by count."""
    if isinstance(count, bool) or int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    count = int(count)
    key = curve.identity
    if key in ledger._entries:
        ledger._entries[key][1] += count
    else:
        ledger._entries[key] = [curve, count]
    ledger.eps_inf_total += count * curve.eps_inf
    eps_kl = curve.eps_kl
    ledger.eps_kl_total += INF if eps_kl is None else count * eps_kl
    ledger._projection = None
    return ledger


def cgf(ledger: CgfLedger, lam: float) -> float:
    """Total K(λ) of the ledger (the projected envelope when one is set)."""
    if not lam > 0:
        raise ValueError(f"CGF order must be positive, got {lam}")
    if ledger._projection is not None:
        projected = ledger._projection(lam)
        if projected is not None:
            return projected
    return ledger.raw_cgf(lam)


def rdp_epsilon(ledger: CgfLedger, alpha: float) -> float:
    """Composed ε(α); α = 1 is the KL track and α = ∞ the pure-DP track."""
    if alpha == 1:
        return ledger.eps_kl_total
    if not alpha > 1:
        raise ValueError(f"RDP order must be at least 1, got {alpha}")
    if math.isinf(alpha):
        return ledger.eps_inf_total
    return min(cgf(ledger, alpha - 1.0) / (alpha - 1.0), ledger.eps_inf_total)


# ─── Projection ───────────────────────────────────────────────────────────────


def projection_grid(
    size: int = config.GRID_SIZE,
    lam_min: float = config.GRID_LAMBDA_MIN,
    lam_max: float = config.GRID_LAMBDA_MAX,
) -> np.ndarray:
    return np.geomspace(lam_min, lam_max, size)


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    hull: List[Tuple[float, float]] = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) > 0:
                break
            hull.pop()
        hull.append((float(x), float(y)))
    return np.array([p[0] for p in hull]), np.array([p[1] for p in hull])


def project_cgf(ledger: CgfLedger, grid: Optional[np.ndarray] = None) -> CgfLedger:
    """
    Snapshot of ledger whose CGF is the lower convex envelope of the raw CGF
    sampled on grid, anchored at K(0) = 0. The first hull segment has the
    largest slope β with βλ below every sample, so the result is convex,
    zero at zero, and K(λ)/λ is nondecreasing. Past the last finite sample
    the raw CGF is used.
    """
    lambdas = projection_grid() if grid is None else np.asarray(grid, dtype=float)
    if lambdas.size == 0 or np.any(np.diff(lambdas) <= 0) or lambdas[0] <= 0:
        raise ValueError("projection grid must be positive and strictly increasing")

    raw = np.array([max(0.0, ledger.raw_cgf(lam)) for lam in lambdas])
    finite = np.isfinite(raw)
    xs = np.concatenate(([0.0], lambdas[finite]))
    ys = np.concatenate(([0.0], raw[finite]))
    hull_x, hull_y = _lower_hull(xs, ys)

    projected = ledger.copy()
    projected._projection = _ProjectedCgf(hull_x, hull_y)
    logging.debug("[Accountant] projected CGF keeps %d of %d grid points", hull_x.size - 1, xs.size - 1)
    return projected


# ─── Conversions ──────────────────────────────────────────────────────────────


def _slope_sign(objective: Callable[[float], float], lam: float) -> int:
    """Sign of the objective's symmetric difference quotient at lam."""
    step = _SLOPE_STEP * lam
    ahead, behind = objective(lam + step), objective(lam - step)
    if ahead == INF:
        return 1
    if ahead > behind:
        return 1
    if ahead < behind:
        return -1
    return 0


def _minimize(
    objective: Callable[[float], float], tol: float, cap: float
) -> Tuple[float, float, bool]:
    """
    Minimize a quasi-convex objective over λ > 0: double from λ = 1 until
    the slope turns nonnegative, then bisect on the slope sign.

    The slope sign comes from a difference quotient at step 1e-6·λ, which is
    rounding noise within about 1e-8·λ of a flat optimum. λ* is only that
    accurate even when tol is smaller; the minimum value is not affected.

    Returns:
        (λ*, objective(λ*), infimum_limited)
    """
    hi = 1.0
    lo = 0.0
    if _slope_sign(objective, hi) < 0:
        lo = hi
        while True:
            hi = min(2.0 * hi, cap)
            if _slope_sign(objective, hi) >= 0:
                break
            if hi >= cap:
                return cap, objective(cap), True
            lo = hi

    for _ in range(_MAX_BISECTIONS):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _slope_sign(objective, mid) >= 0:
            hi = mid
        else:
            lo = mid

    best_lam, best_value = hi, objective(hi)
    if lo > 0:
        value = objective(lo)
        if value < best_value:
            best_lam, best_value = lo, value
    return best_lam, best_value, False


def eps_from_delta(
    ledger: CgfLedger,
    delta: float,
    tol: float = config.SOLVER_TOL,
    cap: float = config.LAMBDA_CAP,
) -> Conversion:
    """Smallest ε with (ε, δ)-DP: min over λ of (log(1/δ) + K(λ)) / λ."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    log_inv_delta = -math.log(delta)

    def objective(lam: float) -> float:
        return (log_inv_delta + cgf(ledger, lam)) / lam

    lam_star, eps, limited = _minimize(objective, tol, cap)
    flags = [INFIMUM_LIMITED] if limited else []
    if limited:
        logging.warning("[Accountant] eps(delta=%g) hit the lambda cap %g", delta, cap)
    eps = max(0.0, eps)
    if len(ledger) and ledger.eps_inf_total < eps:
        eps = ledger.eps_inf_total
        flags.append(PURE_DP)
    logging.debug("[Accountant] eps=%.6g at lambda=%.6g for delta=%g", eps, lam_star, delta)
    return Conversion(eps, delta, lam_star, tuple(flags))


def delta_from_eps(
    ledger: CgfLedger,
    eps: float,
    tol: float = config.SOLVER_TOL,
    cap: float = config.LAMBDA_CAP,
) -> Conversion:
    """Smallest δ with (ε, δ)-DP: min over λ of exp(K(λ) - λε), at most 1."""
    if not eps >= 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    if len(ledger) and eps >= ledger.eps_inf_total:
        return Conversion(eps, 0.0, INF, (PURE_DP,))

    def objective(lam: float) -> float:
        return cgf(ledger, lam) - lam * eps

    lam_star, log_delta, limited = _minimize(objective, tol, cap)
    flags = (INFIMUM_LIMITED,) if limited else ()
    if limited:
        logging.warning("[Accountant] delta(eps=%g) hit the lambda cap %g", eps, cap)
    delta = min(1.0, math.exp(min(log_delta, 0.0)))
    return Conversion(eps, delta, lam_star, flags)


def rdp_to_dp(eps_alpha: float, alpha: float, delta: float) -> PrivacyParams:
    """(ε(α) + log(1/δ)/(α-1), δ)-DP from a single RDP point."""
    if not alpha > 1:
        raise ValueError(f"RDP order must exceed 1, got {alpha}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if math.isinf(alpha):
        return PrivacyParams(eps_alpha, delta)
    return PrivacyParams(eps_alpha - math.log(delta) / (alpha - 1.0), delta)


# ─── Serialization ────────────────────────────────────────────────────────────


def _json_number(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _from_json_number(x):
    if x in ("inf", "-inf"):
        return float(x)
    return x


def ledger_to_records(ledger: CgfLedger) -> List[dict]:
    records = []
    for curve, count in ledger.entries:
        base = curve.base if isinstance(curve, SubsampledCurve) else curve
        spec = base.to_spec()
        record = {
            "mechanism": spec.pop("kind"),
            "params": {key: _json_number(value) for key, value in spec.items()},
        }
        if isinstance(curve, SubsampledCurve):
            record["gamma"] = curve.gamma
            record["bound_kind"] = curve.bound_kind
            if curve.alpha_thresh != config.ALPHA_THRESH:
                record["alpha_thresh"] = curve.alpha_thresh
            if curve.n is not None:
                record["n"] = curve.n
        record["count"] = count
        records.append(record)
    return records


def ledger_from_records(records: List[dict]) -> CgfLedger:
    ledger = CgfLedger()
    for record in records:
        try:
            params = {key: _from_json_number(value) for key, value in record["params"].items()}
            curve: Curve = curve_from_spec({"kind": record["mechanism"], **params})
            count = record["count"]
        except (KeyError, TypeError, AttributeError) as e:
            raise ValueError(f"malformed ledger record {record!r}: {e}") from e
        if "gamma" in record:
            curve = SubsampledCurve(
                curve,
                float(record["gamma"]),
                record.get("bound_kind", "general"),
                int(record.get("alpha_thresh", config.ALPHA_THRESH)),
                record.get("n"),
            )
        compose(ledger, curve, count)
    return ledger


def ledger_to_json(ledger: CgfLedger) -> str:
    return json.dumps(ledger_to_records(ledger), indent=2, sort_keys=True)


def ledger_from_json(text: str) -> CgfLedger:
    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"ledger is not valid JSON: {e}") from e
    if not isinstance(records, list):
        raise ValueError("ledger JSON must be an array of entries")
    return ledger_from_records(records)
