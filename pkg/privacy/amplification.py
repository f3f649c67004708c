"""
SubsampledRDP — Subsampling Amplification
RDP bounds for a mechanism run on a uniformly random subset (sampling
without replacement, ratio γ = m/n):

  general      upper bound valid for any base curve
  tight        sharper upper bound from forward differences of the MGF,
               for tight and self-consistent bases
  lower        matching lower bound from the two-point construction
  puredp_form  closed-form binomial bound for bases with finite ε(∞)
  asymptotic_* Gaussian approximations for a "bad" and a "good" dataset

Integer-order bounds are summed exactly in log space up to alpha_thresh and
bracketed by a max-term search above it. Non-integer orders interpolate the
CGF between the neighbouring integers.
"""

import functools
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from absl import logging

from privacy import config
from privacy.mechanisms import RdpCurve, round_significant
from privacy.numerics import (
    NEG_INF,
    FiniteDifference,
    SignedLogReal,
    forward_difference_report,
    log_binomial,
    log_mix_exp,
    log_sum_exp,
)

INF = math.inf
LOG_2 = math.log(2.0)
LOG_4 = math.log(4.0)

BOUND_KINDS = ("general", "tight", "lower", "puredp_form", "asymptotic_bad", "asymptotic_good")
UPPER_KINDS = ("general", "tight", "puredp_form")
INTEGER_KINDS = ("general", "tight", "lower")

_CACHE_SIZE = 1 << 16


# ─── Checks ───────────────────────────────────────────────────────────────────


def _check_gamma(gamma: float, allow_one: bool = True):
    upper_ok = gamma <= 1 if allow_one else gamma < 1
    if not (gamma > 0 and upper_ok):
        interval = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"gamma must lie in {interval}, got {gamma}")


def _check_integer_order(alpha, minimum: int) -> int:
    if isinstance(alpha, bool) or float(alpha) != int(alpha) or alpha < minimum:
        raise ValueError(f"order must be an integer >= {minimum}, got {alpha}")
    return int(alpha)


def _log_expm1(x: float) -> float:
    """log(e^x - 1) for x >= 0; -inf at 0."""
    if x == 0:
        return NEG_INF
    if x == INF:
        return INF
    if x > 50:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


# ─── General upper bound ──────────────────────────────────────────────────────


def _log_second_order_term(base: RdpCurve, log_gamma: float, alpha: int) -> float:
    eps2 = base.eval(2)
    chi_branch = LOG_4 + _log_expm1(eps2)
    ternary_branch = eps2 + min(LOG_2, 2.0 * _log_expm1(base.eps_inf))
    return 2.0 * log_gamma + log_binomial(alpha, 2) + min(chi_branch, ternary_branch)


def _log_pure_dp_factor(eps_inf: float, j: int) -> float:
    """log min{2, (e^{ε(∞)} - 1)^j}; the constant branch when ε(∞) = ∞."""
    if eps_inf == INF:
        return LOG_2
    return min(LOG_2, j * _log_expm1(eps_inf))


def _log_general_term(base: RdpCurve, log_gamma: float, alpha: int, j: int) -> float:
    if j == 2:
        return _log_second_order_term(base, log_gamma, alpha)
    factor = _log_pure_dp_factor(base.eps_inf, j)
    if factor == NEG_INF:
        return NEG_INF
    return j * log_gamma + log_binomial(alpha, j) + (j - 1) * base.eval(j) + factor


@functools.lru_cache(maxsize=_CACHE_SIZE)
def _general_exact(base: RdpCurve, gamma: float, alpha: int) -> float:
    log_gamma = math.log(gamma)
    terms = [0.0] + [_log_general_term(base, log_gamma, alpha, j) for j in range(2, alpha + 1)]
    return max(0.0, log_sum_exp(terms) / (alpha - 1))


def amplify_general(base: RdpCurve, gamma: float, alpha: int) -> float:
    """Upper bound on ε'(α) for the subsampled mechanism, any base curve."""
    _check_gamma(gamma)
    alpha = _check_integer_order(alpha, 2)
    return _general_exact(base, float(gamma), alpha)


# ─── Tight upper bound ────────────────────────────────────────────────────────


def _mgf_functional(base: RdpCurve) -> Callable[[int], SignedLogReal]:
    """i ↦ e^{(i-1)ε(i)}, with the value 1 at i = 0 and i = 1."""

    def f(i: int) -> SignedLogReal:
        if i < 2:
            return SignedLogReal(1, 0.0)
        return SignedLogReal(1, (i - 1) * base.eval(i))

    return f


@functools.lru_cache(maxsize=_CACHE_SIZE)
def moment_difference(base: RdpCurve, order: int) -> FiniteDifference:
    """B(ε, l): the order-l forward difference of the MGF functional at 0."""
    return forward_difference_report(_mgf_functional(base), order)


def _log_moment(base: RdpCurve, order: int) -> Optional[float]:
    report = moment_difference(base, order)
    if report.cancellation_limited or report.value.sign <= 0:
        return None
    return report.value.logmag


@functools.lru_cache(maxsize=_CACHE_SIZE)
def _tight_exact(base: RdpCurve, gamma: float, alpha: int) -> float:
    log_gamma = math.log(gamma)
    terms = [0.0, _log_second_order_term(base, log_gamma, alpha)]
    fallbacks = 0
    for j in range(3, alpha + 1):
        low = _log_moment(base, 2 * (j // 2))
        high = _log_moment(base, 2 * ((j + 1) // 2))
        if low is None or high is None:
            fallbacks += 1
            terms.append(_log_general_term(base, log_gamma, alpha, j))
            continue
        terms.append(LOG_4 + j * log_gamma + log_binomial(alpha, j) + 0.5 * (low + high))
    if fallbacks:
        logging.warning(
            "[Amplify] tight bound at alpha=%d used %d general-bound fallback terms", alpha, fallbacks
        )
    return max(0.0, log_sum_exp(terms) / (alpha - 1))


def amplify_tight(base: RdpCurve, gamma: float, alpha: int) -> float:
    """Sharper upper bound for tight, self-consistent bases."""
    if not (base.is_tight and base.is_self_consistent):
        raise ValueError(f"tight bound needs a tight, self-consistent base, got {base.name}")
    _check_gamma(gamma)
    alpha = _check_integer_order(alpha, 2)
    return _tight_exact(base, float(gamma), alpha)


# ─── Lower bound ──────────────────────────────────────────────────────────────


def _log_lower_term(base: RdpCurve, log_ratio: float, alpha: int, j: int) -> float:
    if j == 1:
        return math.log(alpha) + log_ratio
    return log_binomial(alpha, j) + j * log_ratio + (j - 1) * base.eval(j)


@functools.lru_cache(maxsize=_CACHE_SIZE)
def _lower_exact(base: RdpCurve, gamma: float, alpha: int) -> float:
    log_ratio = math.log(gamma) - math.log1p(-gamma)
    terms = [0.0] + [_log_lower_term(base, log_ratio, alpha, j) for j in range(1, alpha + 1)]
    return max(0.0, (alpha * math.log1p(-gamma) + log_sum_exp(terms)) / (alpha - 1))


def amplify_lower(base: RdpCurve, gamma: float, alpha: int) -> float:
    """Lower bound on ε'(α) attained by the two-point worst-case construction."""
    if not base.is_tight:
        raise ValueError(f"lower bound needs a tight base, got {base.name}")
    _check_gamma(gamma, allow_one=False)
    alpha = _check_integer_order(alpha, 1)
    if alpha == 1:
        return 0.0
    return _lower_exact(base, float(gamma), alpha)


# ─── Pure-DP binomial form ────────────────────────────────────────────────────


def amplify_puredp_form(base: RdpCurve, gamma: float, alpha: float) -> float:
    if base.eps_inf == INF:
        raise ValueError(f"pure-DP form needs a finite eps_inf, {base.name} has none")
    _check_gamma(gamma)
    if not alpha > 1:
        raise ValueError(f"RDP order must exceed 1, got {alpha}")
    if base.eps_inf == 0:
        return 0.0
    inner = float(np.logaddexp(0.0, math.log(gamma) + base.eval(alpha) + _log_expm1(base.eps_inf)))
    if math.isinf(alpha):
        return inner
    return alpha / (alpha - 1.0) * inner


# ─── Asymptotic Gaussian approximations ───────────────────────────────────────


def asymptotic_gaussian(sigma: float, gamma: float, n: int, alpha: float, case: str) -> float:
    """
    Rényi divergence between the limiting Gaussians of a subsampled mean.

    "bad": every point but one shares a value, the divergence blows up at
    the pole α* = σ²/γ · n/(n-1) + 1. "good": a balanced dataset whose
    sampling variance swamps the noise.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    _check_gamma(gamma, allow_one=False)
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not alpha > 1:
        raise ValueError(f"RDP order must exceed 1, got {alpha}")

    var = sigma * sigma
    if case == "good":
        if math.isinf(alpha):
            return INF
        return alpha * gamma * gamma / (2.0 * var + gamma * (n - 1.0 / n) / 2.0)
    if case != "bad":
        raise ValueError(f"case must be 'bad' or 'good', got {case!r}")

    pole = var / gamma * n / (n - 1.0) + 1.0
    if alpha >= pole:
        return INF
    mean_part = alpha * gamma * gamma / (2.0 * var) * (pole - 1.0) / (pole - alpha)
    variance_part = 0.5 * math.log((pole - 1.0) / pole) + math.log(
        (pole - 1.0) / (pole - alpha)
    ) / (2.0 * (alpha - 1.0))
    return max(0.0, mean_part + variance_part)


# ─── Large-α bracketing ───────────────────────────────────────────────────────


def _geometric_grid(lo: int, hi: int) -> list:
    points = {lo, hi}
    step = 1
    while lo + step - 1 <= hi:
        points.add(lo + step - 1)
        points.add(hi - step + 1)
        step *= 2
    return sorted(p for p in points if lo <= p <= hi)


def _climb(term: Callable[[int], float], lo: int, hi: int, seen: Dict[int, float]):
    """Integer ternary search for the max of a unimodal stretch of term."""

    def value(j: int) -> float:
        if j not in seen:
            seen[j] = term(j)
        return seen[j]

    while hi - lo > 2:
        third = (hi - lo) // 3
        m1, m2 = lo + third, hi - third
        if value(m1) < value(m2):
            lo = m1
        else:
            hi = m2
    for j in range(lo, hi + 1):
        value(j)


def _search_log_terms(term: Callable[[int], float], lo: int, hi: int) -> Dict[int, float]:
    """
    Evaluate term on geometric grids from both ends of [lo, hi], then refine
    around the two largest local maxima. The term sequences here have at most
    two of them, so O(log α) evaluations find the global max.
    """
    grid = _geometric_grid(lo, hi)
    seen = {j: term(j) for j in grid}
    peaks = []
    for idx, j in enumerate(grid):
        left = seen[grid[idx - 1]] if idx > 0 else NEG_INF
        right = seen[grid[idx + 1]] if idx + 1 < len(grid) else NEG_INF
        if seen[j] >= left and seen[j] >= right:
            peaks.append((seen[j], idx))
    for _, idx in sorted(peaks, reverse=True)[:2]:
        a = grid[max(idx - 1, 0)]
        b = grid[min(idx + 1, len(grid) - 1)]
        _climb(term, a, b, seen)
    return seen


def _bracket(found: Dict[int, float], alpha: int, offset: float = 0.0) -> Tuple[float, float]:
    """
    Evaluated terms count exactly. Each run of unevaluated indices between
    two evaluated ones is charged at the larger of its two ends; peaks are
    refined, so the run lies on a monotone stretch.
    """
    keys = sorted(found)
    values = [0.0] + [found[j] for j in keys]
    known = log_sum_exp(values)
    gaps = [math.log(b - a - 1) + max(found[a], found[b]) for a, b in zip(keys, keys[1:]) if b - a > 1]
    total = log_sum_exp(values + gaps) if gaps else known
    lo = (offset + known) / (alpha - 1)
    width = max(0.0, total - known) / (alpha - 1)
    return max(0.0, lo), max(0.0, lo + width)


def approx_general_bound(
    base: RdpCurve, gamma: float, alpha: int, alpha_thresh: Optional[int] = None
) -> Tuple[float, float]:
    """
    [lo, hi] around the general bound from its largest summand.

    lo sums the terms actually evaluated and hi adds each unevaluated
    summand at a value no larger than the largest found, so
    hi - lo <= log(α+1)/(α-1).
    """
    thresh = config.ALPHA_THRESH if alpha_thresh is None else alpha_thresh
    _check_gamma(gamma)
    alpha = _check_integer_order(alpha, 2)
    if alpha <= thresh:
        raise ValueError(f"bracketing is for orders above {thresh}, got {alpha}")
    term = functools.partial(_log_general_term, base, math.log(gamma), alpha)
    return _bracket(_search_log_terms(term, 2, alpha), alpha)


def approx_lower_bound(base: RdpCurve, gamma: float, alpha: int) -> Tuple[float, float]:
    """Same bracketing applied to the lower-bound sum."""
    _check_gamma(gamma, allow_one=False)
    alpha = _check_integer_order(alpha, 2)
    log_ratio = math.log(gamma) - math.log1p(-gamma)
    term = functools.partial(_log_lower_term, base, log_ratio, alpha)
    return _bracket(_search_log_terms(term, 1, alpha), alpha, alpha * math.log1p(-gamma))


# ─── The subsampled curve ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class SubsampledCurve:
    """A base curve amplified by subsampling, evaluated with one bound kind."""

    base: RdpCurve
    gamma: float
    bound_kind: str = "general"
    alpha_thresh: int = config.ALPHA_THRESH
    n: Optional[int] = None

    def __post_init__(self):
        if self.bound_kind not in BOUND_KINDS:
            raise ValueError(f"unknown bound kind {self.bound_kind!r}; expected one of {BOUND_KINDS}")
        kind, base = self.bound_kind, self.base
        _check_gamma(self.gamma, allow_one=kind in UPPER_KINDS)
        if self.alpha_thresh < 2:
            raise ValueError(f"alpha_thresh must be at least 2, got {self.alpha_thresh}")
        if kind == "tight" and not (base.is_tight and base.is_self_consistent):
            raise ValueError(f"tight bound needs a tight, self-consistent base, got {base.name}")
        if kind == "lower" and not base.is_tight:
            raise ValueError(f"lower bound needs a tight base, got {base.name}")
        if kind == "puredp_form" and base.eps_inf == INF:
            raise ValueError(f"pure-DP form needs a finite eps_inf, {base.name} has none")
        if kind.startswith("asymptotic"):
            if base.name != "gaussian":
                raise ValueError(f"asymptotic bounds are Gaussian-only, got {base.name}")
            if self.n is None or self.n < 2:
                raise ValueError(f"asymptotic bounds need a dataset size n >= 2, got {self.n}")

    @property
    def identity(self) -> tuple:
        return ("subsampled", self.bound_kind, self.base.identity, round_significant(self.gamma), self.n)

    @property
    def eps_inf(self) -> float:
        if self.bound_kind not in UPPER_KINDS or self.base.eps_inf == INF:
            return INF
        return log_mix_exp(self.gamma, self.base.eps_inf)

    @property
    def eps_kl(self) -> Optional[float]:
        # D_1 <= D_2 for any pair
        if self.bound_kind not in UPPER_KINDS:
            return None
        return self.eval(2)

    def integer_bound(self, alpha: int) -> float:
        return _integer_bound(self, int(alpha))

    def continuous_bound(self, alpha: float) -> float:
        kind = self.bound_kind
        if kind == "puredp_form":
            return amplify_puredp_form(self.base, self.gamma, alpha)
        sigma = dict(self.base.params)["sigma"]
        return asymptotic_gaussian(sigma, self.gamma, self.n, alpha, kind.split("_")[1])

    def eval(self, alpha: float) -> float:
        return amplify_fractional(self, alpha)

    __call__ = eval

    def cgf(self, lam: float) -> float:
        if lam < 0:
            raise ValueError(f"CGF order must be nonnegative, got {lam}")
        if lam == 0:
            return 0.0
        if self.bound_kind in INTEGER_KINDS:
            return _interpolated_cgf(self, lam)
        return lam * self.continuous_bound(lam + 1.0)


@functools.lru_cache(maxsize=_CACHE_SIZE)
def _integer_bound(curve: SubsampledCurve, alpha: int) -> float:
    kind, base, gamma = curve.bound_kind, curve.base, curve.gamma
    if kind not in INTEGER_KINDS:
        return curve.continuous_bound(alpha)
    if alpha <= curve.alpha_thresh:
        if kind == "general":
            return amplify_general(base, gamma, alpha)
        if kind == "tight":
            return amplify_tight(base, gamma, alpha)
        return amplify_lower(base, gamma, alpha)
    if kind == "lower":
        return approx_lower_bound(base, gamma, alpha)[0]
    return approx_general_bound(base, gamma, alpha, curve.alpha_thresh)[1]


def _integer_cgf(curve: SubsampledCurve, lam: int) -> float:
    if lam == 0:
        return 0.0
    return lam * _integer_bound(curve, lam + 1)


def _interpolated_cgf(curve: SubsampledCurve, lam: float) -> float:
    floor = math.floor(lam)
    weight = lam - floor
    if weight == 0:
        return _integer_cgf(curve, floor)
    return (1.0 - weight) * _integer_cgf(curve, floor) + weight * _integer_cgf(curve, floor + 1)


def amplify_fractional(curve: SubsampledCurve, alpha: float) -> float:
    """
    ε'(α) at any real order. Integer-only bounds interpolate the CGF
    linearly between the bracketing integer orders (anchored at K(0) = 0)
    and divide by λ = α - 1; closed-form kinds evaluate directly.
    """
    if alpha == 1 and curve.eps_kl is not None:
        return curve.eps_kl
    if not alpha > 1:
        raise ValueError(f"RDP order must exceed 1, got {alpha}")
    if math.isinf(alpha):
        return curve.eps_inf if curve.bound_kind in INTEGER_KINDS else curve.continuous_bound(alpha)
    if curve.bound_kind not in INTEGER_KINDS:
        return curve.continuous_bound(alpha)
    if float(alpha).is_integer():
        return _integer_bound(curve, int(alpha))
    lam = alpha - 1.0
    return _interpolated_cgf(curve, lam) / lam
