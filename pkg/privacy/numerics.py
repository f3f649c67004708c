"""
SubsampledRDP — Numerics
Signed log-domain arithmetic, stable log-sum-exp, log-binomials and forward
finite differences. Every bound in the package is assembled from these so
that exponentially large terms never leave log space.
"""

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np
from absl import logging
from scipy import special

from privacy import config

INF = math.inf
NEG_INF = -math.inf

# exp() overflows past this log-magnitude
_MAX_LOG_FLOAT = math.log(np.finfo(float).max)
_EXACT_COMB_LIMIT = 1000


# ─── Signed log reals ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class SignedLogReal:
    """A real number held as sign * exp(logmag)."""

    sign: int
    logmag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if math.isnan(self.logmag):
            raise ValueError("logmag cannot be NaN")
        if (self.sign == 0) != (self.logmag == NEG_INF):
            raise ValueError(
                f"sign 0 requires logmag=-inf, got sign={self.sign}, logmag={self.logmag}"
            )

    @classmethod
    def encode(cls, x: float) -> "SignedLogReal":
        if math.isnan(x):
            raise ValueError("cannot encode NaN")
        if x == 0:
            return ZERO
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    def decode(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.logmag > _MAX_LOG_FLOAT:
            return self.sign * INF
        return self.sign * math.exp(self.logmag)

    def __neg__(self) -> "SignedLogReal":
        return SignedLogReal(-self.sign, self.logmag)

    def __add__(self, other: "SignedLogReal") -> "SignedLogReal":
        return slr_add(self, other)


ZERO = SignedLogReal(0, NEG_INF)
ONE = SignedLogReal(1, 0.0)


def slr_add(a: SignedLogReal, b: SignedLogReal) -> SignedLogReal:
    """Sum of two signed log reals; exact cancellation gives ZERO."""
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    if a.sign == b.sign:
        return SignedLogReal(a.sign, float(np.logaddexp(a.logmag, b.logmag)))
    big, small = (a, b) if a.logmag >= b.logmag else (b, a)
    if big.logmag == small.logmag:
        if big.logmag == INF:
            raise ValueError("inf - inf is undefined")
        return ZERO
    if big.logmag == INF:
        return big
    gap = -math.expm1(small.logmag - big.logmag)
    logmag = big.logmag + math.log(gap) if gap > 0 else NEG_INF
    # operands equal to within rounding
    if not math.isfinite(logmag):
        return ZERO
    return SignedLogReal(big.sign, logmag)


# ─── Log-sum-exp and log-binomials ────────────────────────────────────────────


def log_sum_exp(xs: Sequence[float]) -> float:
    """log(sum(exp(xs))) with -inf and +inf entries handled explicitly."""
    arr = np.asarray(xs, dtype=float)
    if arr.size == 0:
        raise ValueError("log_sum_exp needs at least one term")
    if np.isnan(arr).any():
        raise ValueError("log_sum_exp got NaN input")
    top = arr.max()
    if top == NEG_INF:
        return NEG_INF
    if top == INF:
        return INF
    return float(special.logsumexp(arr))


def log_mix_exp(gamma: float, x: float) -> float:
    """log(1 - γ + γe^x) for γ in (0, 1] and x >= 0, finite for any finite x."""
    if x == INF:
        return INF
    if x <= 50:
        return math.log1p(gamma * math.expm1(x))
    keep = NEG_INF if gamma == 1 else math.log1p(-gamma)
    return float(np.logaddexp(keep, math.log(gamma) + x))


def log_binomial(n: int, k: int) -> float:
    """log C(n, k); exact integer arithmetic for small n, log-gamma otherwise."""
    if n < 0 or k < 0:
        raise ValueError(f"log_binomial needs nonnegative arguments, got n={n}, k={k}")
    if k > n:
        raise ValueError(f"log_binomial needs k <= n, got n={n}, k={k}")
    if n <= _EXACT_COMB_LIMIT:
        return math.log(math.comb(n, k))
    return float(special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1))


# ─── Forward finite differences ───────────────────────────────────────────────


@dataclass(frozen=True)
class FiniteDifference:
    """Result of an alternating binomial sum plus its cancellation metadata."""

    value: SignedLogReal
    largest_term: float
    cancellation_limited: bool


def _difference_from_values(values: Sequence[SignedLogReal], order: int) -> FiniteDifference:
    positive: List[float] = []
    negative: List[float] = []
    for i in range(order + 1):
        v = values[i]
        if v.sign == 0:
            continue
        sign = v.sign if (order - i) % 2 == 0 else -v.sign
        term = log_binomial(order, i) + v.logmag
        (positive if sign > 0 else negative).append(term)

    if not positive and not negative:
        return FiniteDifference(ZERO, NEG_INF, False)

    largest = max(positive + negative)
    pos = SignedLogReal(1, log_sum_exp(positive)) if positive else ZERO
    neg = SignedLogReal(-1, log_sum_exp(negative)) if negative else ZERO

    if largest == INF:
        if pos.logmag == INF and neg.logmag == INF:
            return FiniteDifference(ZERO, INF, True)
        return FiniteDifference(pos if pos.logmag == INF else neg, INF, False)

    total = slr_add(pos, neg)
    if total.sign != 0 and total.logmag - largest >= math.log(config.CANCELLATION_FLOOR):
        return FiniteDifference(total, largest, False)
    return FiniteDifference(ZERO, largest, True)


def forward_difference_report(f: Callable[[int], SignedLogReal], order: int) -> FiniteDifference:
    """Δ^order[f](0) as an explicit alternating binomial sum in signed log space."""
    if order < 1:
        raise ValueError(f"order must be a positive integer, got {order}")
    values = [f(i) for i in range(order + 1)]
    return _difference_from_values(values, order)


def forward_difference(f: Callable[[int], SignedLogReal], order: int) -> SignedLogReal:
    return forward_difference_report(f, order).value


def forward_difference_table(
    f: Callable[[int], SignedLogReal], max_order: int
) -> List[FiniteDifference]:
    """Orders 1..max_order, sharing the max_order+1 evaluations of f."""
    if max_order < 1:
        raise ValueError(f"max_order must be a positive integer, got {max_order}")
    values = [f(i) for i in range(max_order + 1)]
    table = [_difference_from_values(values, order) for order in range(1, max_order + 1)]
    limited = sum(1 for row in table if row.cancellation_limited)
    if limited:
        logging.debug("[Numerics] %d of %d difference orders are cancellation-limited", limited, max_order)
    return table
