"""
SubsampledRDP — Classical Baselines
(ε, δ) composition theorems and the classical subsampling lemma, plus the
per-k calibration that turns a base mechanism into the strongest baseline
these tools can certify for k subsampled rounds.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from absl import logging

from privacy import config
from privacy.accountant import CgfLedger, PrivacyParams, compose, eps_from_delta
from privacy.mechanisms import RdpCurve
from privacy.numerics import log_mix_exp

METHODS = ("naive", "strong")


class InfeasibleBudgetError(ValueError):
    """No calibration candidate fits inside the target δ."""


@dataclass(frozen=True)
class BaselineQuery:
    per_round: PrivacyParams
    rounds: int
    delta_slack: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.rounds, bool) or int(self.rounds) != self.rounds or self.rounds < 1:
            raise ValueError(f"rounds must be a positive integer, got {self.rounds}")
        if self.gamma is not None and not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")


def naive_compose(q: BaselineQuery) -> PrivacyParams:
    """k rounds of (ε, δ)-DP are (kε, kδ)-DP."""
    return PrivacyParams(q.rounds * q.per_round.eps, min(1.0, q.rounds * q.per_round.delta))


def strong_compose(q: BaselineQuery) -> PrivacyParams:
    """(ε√(2k ln(1/δ*)) + 2kε², kδ + δ*) for per-round ε <= 1."""
    eps, k = q.per_round.eps, q.rounds
    if eps > 1:
        raise ValueError(f"strong composition needs per-round eps <= 1, got {eps}")
    slack = q.delta_slack
    if slack is None or not 0 < slack < 1:
        raise ValueError(f"delta_slack must lie in (0, 1), got {slack}")
    total = eps * math.sqrt(2.0 * k * -math.log(slack)) + 2.0 * k * eps * eps
    return PrivacyParams(total, min(1.0, k * q.per_round.delta + slack))


def subsample_dp(eps: float, delta: float, gamma: float) -> PrivacyParams:
    """Classical amplification: (log(1 + γ(e^ε - 1)), γδ)."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return PrivacyParams(log_mix_exp(gamma, eps), gamma * delta)


# ─── Calibration ──────────────────────────────────────────────────────────────


def calibrated_baseline(
    base: RdpCurve,
    gamma: float,
    rounds: int,
    target_delta: float,
    method: str = "strong",
    candidates: int = config.BASELINE_CANDIDATES,
) -> float:
    """
    Smallest total ε over per-round conversions (ε̃, δ̃) of base.

    δ̃ runs over log-spaced candidates in [t/(10γk), t/(γk)]; each is
    amplified with subsample_dp and composed k times. For "strong" the
    slack δ* takes what is left of the budget, and the naive answer for the
    same candidate is kept when it is smaller or strong does not apply.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if not 0 < target_delta < 1:
        raise ValueError(f"target_delta must lie in (0, 1), got {target_delta}")
    if isinstance(rounds, bool) or int(rounds) != rounds or rounds < 1:
        raise ValueError(f"rounds must be a positive integer, got {rounds}")

    single = compose(CgfLedger(), base)
    top = target_delta / (gamma * rounds)
    best = math.inf
    for delta_tilde in np.geomspace(top / 10.0, top, candidates):
        if not 0 < delta_tilde < 1:
            continue
        per_round = eps_from_delta(single, float(delta_tilde)).eps
        amplified = subsample_dp(per_round, float(delta_tilde), gamma)
        query = BaselineQuery(amplified, rounds)
        best = min(best, naive_compose(query).eps)
        slack = target_delta - rounds * amplified.delta
        if method == "strong" and amplified.eps <= 1 and 0 < slack < 1:
            best = min(best, strong_compose(BaselineQuery(amplified, rounds, slack)).eps)

    if math.isinf(best):
        raise InfeasibleBudgetError(
            f"no per-round delta fits target_delta={target_delta} for gamma={gamma}, k={rounds}"
        )
    logging.debug("[Baselines] %s baseline k=%d -> eps=%.6g", method, rounds, best)
    return best


def calibrated_strong_baseline(
    base: RdpCurve, gamma: float, rounds: int, target_delta: float
) -> float:
    return calibrated_baseline(base, gamma, rounds, target_delta, "strong")
