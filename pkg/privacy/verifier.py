"""
SubsampledRDP — Bound Verifier
Independent numerical oracle for the subsampling bounds.

For a worst-case pair (q = output law on [x, ..., x], p = output law after
swapping in x') the subsampled mechanism outputs the mixture (1-γ)q + γp.
Its true Rényi divergence from q is integrated by adaptive quadrature (or
summed exactly for discrete outputs) and checked against the bounds:

    lower <= oracle <= general upper,  lower <= tight upper
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from absl import logging
from scipy import integrate

from privacy import config
from privacy.amplification import SubsampledCurve
from privacy.mechanisms import RdpCurve

LogDensity = Callable[[np.ndarray], np.ndarray]

SUPPORTED_KINDS = ("gaussian", "laplace", "randresp")

_SCAN_POINTS = 4001
_MAX_WIDENINGS = 30
# integrate the excess q·(mix^α - 1) directly while the integrand stays below e^30
_EXCESS_REGIME_LOG = 30.0


class QuadratureError(RuntimeError):
    """Quadrature did not reach its tolerance or the window never settled."""


class UnsupportedMechanismError(ValueError):
    """The mechanism has no worst-case pair to integrate."""


# ─── Worst-case pairs ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class WorstCasePair:
    """
    Log densities of q = M([x, ..., x]) and p = M([x, ..., x, x']).

    Continuous pairs carry a center and scale for the integration window and
    the kinks of the densities as breakpoints; discrete pairs list their
    finite support instead.
    """

    log_q: LogDensity
    log_p: LogDensity
    gamma: float
    center: float = 0.5
    scale: float = 1.0
    breakpoints: Tuple[float, ...] = ()
    support: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    @property
    def is_discrete(self) -> bool:
        return self.support is not None

    def q_density(self, theta):
        return np.exp(self.log_q(theta))

    def p_density(self, theta):
        return np.exp(self.log_p(theta))

    def log_ratio(self, theta):
        return self.log_p(theta) - self.log_q(theta)


def gaussian_pair(sigma: float, gamma: float) -> WorstCasePair:
    log_norm = math.log(sigma * math.sqrt(2.0 * math.pi))
    var2 = 2.0 * sigma * sigma
    return WorstCasePair(
        log_q=lambda t: -np.square(t) / var2 - log_norm,
        log_p=lambda t: -np.square(np.subtract(t, 1.0)) / var2 - log_norm,
        gamma=gamma,
        scale=sigma,
    )


def laplace_pair(b: float, gamma: float) -> WorstCasePair:
    log_norm = math.log(2.0 * b)
    return WorstCasePair(
        log_q=lambda t: -np.abs(t) / b - log_norm,
        log_p=lambda t: -np.abs(np.subtract(t, 1.0)) / b - log_norm,
        gamma=gamma,
        scale=b,
        breakpoints=(0.0, 1.0),
    )


def randresp_pair(p: float, gamma: float) -> WorstCasePair:
    """Outputs {0, 1}; q reports 1 with probability 1-p, p with probability p."""
    log_p, log_q = math.log(p), math.log1p(-p)
    return WorstCasePair(
        log_q=lambda y: np.where(np.equal(y, 1.0), log_q, log_p),
        log_p=lambda y: np.where(np.equal(y, 1.0), log_p, log_q),
        gamma=gamma,
        support=(0.0, 1.0),
    )


def worst_case_pair(curve: RdpCurve, gamma: float) -> WorstCasePair:
    params = dict(curve.params)
    if curve.name == "gaussian":
        return gaussian_pair(params["sigma"], gamma)
    if curve.name == "laplace":
        return laplace_pair(params["b"], gamma)
    if curve.name == "randresp":
        return randresp_pair(params["p"], gamma)
    raise UnsupportedMechanismError(
        f"no worst-case pair for {curve.name!r}; supported kinds are {SUPPORTED_KINDS}"
    )


# ─── Integration helpers ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    error: float


def _log_mixture(pair: WorstCasePair, log_ratio):
    """log((1-γ) + γ·p/q), accurate near p = q."""
    gamma = pair.gamma
    log_ratio = np.asarray(log_ratio, dtype=float)
    with np.errstate(over="ignore"):
        near = np.log1p(gamma * np.expm1(np.minimum(log_ratio, 50.0)))
    far = np.logaddexp(math.log1p(-gamma), math.log(gamma) + log_ratio)
    return np.where(log_ratio < 50.0, near, far)


def _window(log_integrand: LogDensity, pair: WorstCasePair) -> Tuple[float, float, float, float]:
    """
    Finite window holding the integrand mass: start at center ± WINDOW·scale
    and widen until the peak is interior and both edges sit TAIL_MASS below it.

    Returns:
        (lo, hi, argmax, max) of the log integrand on the scan grid.
    """
    half = config.QUAD_WINDOW * pair.scale
    lo, hi = pair.center - half, pair.center + half
    floor = math.log(config.QUAD_TAIL_MASS)
    margin = _SCAN_POINTS // 100
    for _ in range(_MAX_WIDENINGS):
        xs = np.linspace(lo, hi, _SCAN_POINTS)
        with np.errstate(divide="ignore"):
            hs = log_integrand(xs)
        idx = int(np.argmax(hs))
        peak = float(hs[idx])
        if not math.isfinite(peak):
            raise QuadratureError(f"log integrand has no finite peak on [{lo}, {hi}]")
        grow_lo = hs[0] > peak + floor or idx < margin
        grow_hi = hs[-1] > peak + floor or idx > _SCAN_POINTS - 1 - margin
        if not (grow_lo or grow_hi):
            return lo, hi, float(xs[idx]), peak
        width = hi - lo
        if grow_lo:
            lo -= width
        if grow_hi:
            hi += width
    raise QuadratureError(f"integration window failed to settle after {_MAX_WIDENINGS} widenings")


def _quad(fn: Callable[[float], float], lo: float, hi: float, points: Sequence[float], epsabs: float, epsrel: float):
    inside = sorted({p for p in points if lo < p < hi})
    result = integrate.quad(
        fn,
        lo,
        hi,
        points=inside or None,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=config.QUAD_LIMIT,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    tolerance = max(epsabs, epsrel * abs(value))
    if not math.isfinite(value) or abserr > 10.0 * tolerance:
        message = result[3] if len(result) > 3 else "error estimate above tolerance"
        raise QuadratureError(f"quadrature error {abserr:.3g} exceeds {tolerance:.3g}: {message}")
    return value, abserr


# ─── Rényi oracle ─────────────────────────────────────────────────────────────


def _discrete_renyi(pair: WorstCasePair, alpha: float) -> float:
    """Exact excess sum Σ q(y)·(mix(y)^α - 1) over the finite support."""
    excess = 0.0
    for y in pair.support:
        log_q = float(pair.log_q(y))
        power = alpha * float(_log_mixture(pair, pair.log_ratio(y)))
        if power < 1.0:
            excess += math.exp(log_q) * math.expm1(power)
        else:
            excess += math.exp(log_q + power) - math.exp(log_q)
    if math.isinf(excess):
        return _discrete_renyi_log(pair, alpha)
    return max(0.0, math.log1p(excess) / (alpha - 1.0))


def _discrete_renyi_log(pair: WorstCasePair, alpha: float) -> float:
    """Generic log-space path: log Σ q(y)·mix(y)^α."""
    support = np.asarray(pair.support, dtype=float)
    terms = pair.log_q(support) + alpha * _log_mixture(pair, pair.log_ratio(support))
    return max(0.0, float(np.logaddexp.reduce(terms)) / (alpha - 1.0))


def oracle_renyi_estimate(
    pair: WorstCasePair,
    alpha: float,
    epsabs: float = config.QUAD_EPSABS,
    epsrel: float = config.QUAD_EPSREL,
) -> OracleEstimate:
    """D_α((1-γ)q + γp || q) with a propagated quadrature error estimate."""
    if not alpha > 1 or math.isinf(alpha):
        raise ValueError(f"oracle order must be finite and exceed 1, got {alpha}")
    if pair.is_discrete:
        return OracleEstimate(_discrete_renyi(pair, alpha), 0.0)

    def log_integrand(theta):
        return pair.log_q(theta) + alpha * _log_mixture(pair, pair.log_ratio(theta))

    lo, hi, mode, peak = _window(log_integrand, pair)
    points = list(pair.breakpoints) + [mode]

    if peak <= _EXCESS_REGIME_LOG:

        def excess(theta: float) -> float:
            log_q = float(pair.log_q(theta))
            power = alpha * float(_log_mixture(pair, pair.log_ratio(theta)))
            if power < 1.0:
                return math.exp(log_q) * math.expm1(power)
            return math.exp(log_q + power) - math.exp(log_q)

        total, abserr = _quad(excess, lo, hi, points, epsabs, epsrel)
        value = math.log1p(total) / (alpha - 1.0)
        error = abserr / max(1.0 + total, 1e-300) / (alpha - 1.0)
    else:

        def scaled(theta: float) -> float:
            return math.exp(float(log_integrand(theta)) - peak)

        total, abserr = _quad(scaled, lo, hi, points, epsabs, epsrel)
        if total <= 0:
            raise QuadratureError(f"scaled integral is not positive at alpha={alpha}")
        value = (peak + math.log(total)) / (alpha - 1.0)
        error = abserr / total / (alpha - 1.0)
    return OracleEstimate(max(0.0, value), error)


def oracle_renyi(pair: WorstCasePair, alpha: float, **tolerances) -> float:
    return oracle_renyi_estimate(pair, alpha, **tolerances).value


def oracle_chi(pair: WorstCasePair, order: int, absolute: bool = False) -> float:
    """
    E_q[(p/q - 1)^j], or E_q[|p/q - 1|^j] with absolute=True. The signed
    version needs an even order unless the caller accepts a signed odd moment.
    """
    if isinstance(order, bool) or int(order) != order or order < 2:
        raise ValueError(f"order must be an integer >= 2, got {order}")
    odd_signed = order % 2 == 1 and not absolute

    def log_abs_moment(theta):
        with np.errstate(divide="ignore"):
            return pair.log_q(theta) + order * np.log(np.abs(np.expm1(pair.log_ratio(theta))))

    def sign(theta) -> float:
        return float(np.sign(pair.log_ratio(theta))) if odd_signed else 1.0

    if pair.is_discrete:
        return float(sum(sign(y) * math.exp(float(log_abs_moment(y))) for y in pair.support))

    try:
        lo, hi, mode, peak = _window(log_abs_moment, pair)
    except QuadratureError:
        # p = q makes the integrand identically zero
        probe = log_abs_moment(np.linspace(pair.center - pair.scale, pair.center + pair.scale, 11))
        if np.all(np.isneginf(probe)):
            return 0.0
        raise

    def scaled(theta: float) -> float:
        return sign(theta) * math.exp(float(log_abs_moment(theta)) - peak)

    points = list(pair.breakpoints) + [mode]
    total, _ = _quad(scaled, lo, hi, points, config.QUAD_EPSABS, config.QUAD_EPSREL)
    return total * math.exp(peak)


def check_normalization(pair: WorstCasePair) -> Tuple[float, float]:
    """Total mass of q and p."""
    if pair.is_discrete:
        support = np.asarray(pair.support, dtype=float)
        return float(np.sum(pair.q_density(support))), float(np.sum(pair.p_density(support)))
    masses = []
    for log_density in (pair.log_q, pair.log_p):
        lo, hi, mode, _ = _window(log_density, pair)
        points = list(pair.breakpoints) + [mode]
        mass, _ = _quad(lambda t: math.exp(float(log_density(t))), lo, hi, points, config.QUAD_EPSABS, config.QUAD_EPSREL)
        masses.append(mass)
    return masses[0], masses[1]


# ─── Sandwich report ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class BoundReport:
    alpha: float
    lower: Optional[float]
    oracle: Optional[float]
    oracle_error: Optional[float]
    upper_general: Optional[float]
    upper_tight: Optional[float]
    asymptotic_bad: Optional[float]
    asymptotic_good: Optional[float]
    passed: bool
    error: Optional[str] = None

    def as_row(self) -> dict:
        return {
            "alpha": self.alpha,
            "lower": self.lower,
            "oracle": self.oracle,
            "upper_general": self.upper_general,
            "upper_tight": self.upper_tight,
            "asymptotic_bad": self.asymptotic_bad,
            "asymptotic_good": self.asymptotic_good,
            "pass": self.passed,
        }


def _below(a: Optional[float], b: Optional[float], slack: float) -> bool:
    if a is None or b is None:
        return True
    return a <= b + slack


def sandwich_report(
    curve: RdpCurve,
    gamma: float,
    alphas: Sequence[float],
    n: Optional[int] = None,
) -> List[BoundReport]:
    """
    One BoundReport per order. Non-integer orders report no lower bound:
    interpolating a lower bound does not give one. Quadrature failures mark
    their row as failed without stopping the sweep.
    """
    pair = worst_case_pair(curve, gamma)
    general = SubsampledCurve(curve, gamma, "general")
    lower = SubsampledCurve(curve, gamma, "lower")
    tight = SubsampledCurve(curve, gamma, "tight") if curve.is_self_consistent else None
    asymptotic = ()
    if curve.name == "gaussian":
        size = n if n is not None else max(2, round(100.0 / gamma))
        asymptotic = tuple(SubsampledCurve(curve, gamma, kind, n=size) for kind in ("asymptotic_bad", "asymptotic_good"))

    reports = []
    for alpha in alphas:
        alpha = float(alpha)
        is_integer = alpha.is_integer()
        low = lower.eval(alpha) if is_integer else None
        upper = general.eval(alpha)
        upper_tight = tight.eval(alpha) if tight is not None and is_integer else None
        bad, good = (c.eval(alpha) for c in asymptotic) if asymptotic else (None, None)
        try:
            estimate = oracle_renyi_estimate(pair, alpha)
        except QuadratureError as e:
            logging.warning("[Verifier] alpha=%g unverifiable: %s", alpha, e)
            reports.append(BoundReport(alpha, low, None, None, upper, upper_tight, bad, good, False, str(e)))
            continue

        slack = max(estimate.error, config.SANDWICH_RTOL * estimate.value) + config.SANDWICH_ATOL
        passed = (
            _below(low, estimate.value, slack)
            and _below(estimate.value, upper, slack)
            and _below(low, upper_tight, slack)
        )
        if not passed:
            logging.warning(
                "[Verifier] sandwich fails at alpha=%g: lower=%s oracle=%s upper=%s tight=%s",
                alpha, low, estimate.value, upper, upper_tight,
            )
        reports.append(BoundReport(alpha, low, estimate.value, estimate.error, upper, upper_tight, bad, good, passed))

    failures = sum(1 for r in reports if not r.passed)
    logging.info("[Verifier] %s gamma=%g: %d/%d orders pass", curve.name, gamma, len(reports) - failures, len(reports))
    return reports
