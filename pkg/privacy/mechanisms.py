"""
SubsampledRDP — Mechanism Catalog
Closed-form RDP curves ε(α) for the base mechanisms that get subsampled:
Gaussian, Laplace, randomized response, pure-DP and exponential-family.

Sensitivity is normalized to 1 in every constructor; callers rescale their
noise parameter (σ / sensitivity) before building a curve.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from privacy import config

INF = math.inf

ParamValue = Union[float, bool, str, None]
Bound = Union[float, Callable[[float], float], None]

# Richardson step for the α → 1 right-limit
_KL_STEP = 1e-7


def round_significant(x: ParamValue, digits: int = config.SIGNIFICANT_DIGITS) -> ParamValue:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        return x
    if not math.isfinite(x) or x == 0:
        return float(x)
    return float(f"{x:.{digits}g}")


# ─── The curve type ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RdpCurve:
    """
    A mechanism's RDP curve α ↦ ε(α) for α in (1, ∞].

    eps_inf is ε(∞) (the pure-DP level, possibly +inf) and eps_kl the α → 1
    limit. The tightness flags gate which subsampling bounds apply.
    """

    name: str
    params: Tuple[Tuple[str, ParamValue], ...]
    epsilon_fn: Callable[[float], float] = field(compare=False, repr=False)
    eps_inf: float = INF
    eps_kl: Optional[float] = None
    is_tight: bool = False
    is_self_consistent: bool = False

    @property
    def identity(self) -> tuple:
        return (self.name, tuple((k, round_significant(v)) for k, v in self.params))

    def eval(self, alpha: float) -> float:
        if alpha == 1:
            if self.eps_kl is None:
                raise ValueError(f"{self.name} curve has no KL limit")
            return self.eps_kl
        if not alpha > 1:
            raise ValueError(f"RDP order must exceed 1, got {alpha}")
        if math.isinf(alpha):
            return self.eps_inf
        value = float(self.epsilon_fn(float(alpha)))
        return max(0.0, min(value, self.eps_inf))

    __call__ = eval

    def cgf(self, lam: float) -> float:
        """K(λ) = λ·ε(λ+1)."""
        if lam < 0:
            raise ValueError(f"CGF order must be nonnegative, got {lam}")
        if lam == 0:
            return 0.0
        return lam * self.eval(lam + 1.0)

    def to_spec(self) -> Dict[str, ParamValue]:
        spec: Dict[str, ParamValue] = {"kind": self.name}
        for key, value in self.params:
            if isinstance(value, str):
                raise ValueError(f"{self.name} curve with callable {key} is not serializable")
            spec[key] = value
        return spec


def _right_limit(fn: Callable[[float], float]) -> float:
    """Richardson-refined limit of fn(α) as α → 1 from the right."""
    return max(0.0, 2.0 * fn(1.0 + _KL_STEP) - fn(1.0 + 2.0 * _KL_STEP))


# ─── Catalog ──────────────────────────────────────────────────────────────────


def gaussian_rdp(sigma: float) -> RdpCurve:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    scale = 2.0 * sigma * sigma
    return RdpCurve(
        name="gaussian",
        params=(("sigma", float(sigma)),),
        epsilon_fn=lambda alpha: alpha / scale,
        eps_inf=INF,
        eps_kl=1.0 / scale,
        is_tight=True,
        is_self_consistent=True,
    )


def laplace_rdp(b: float) -> RdpCurve:
    if not b > 0:
        raise ValueError(f"Laplace scale b must be positive, got {b}")

    def epsilon(alpha: float) -> float:
        log_mix = np.logaddexp(
            math.log(alpha / (2.0 * alpha - 1.0)) + (alpha - 1.0) / b,
            math.log((alpha - 1.0) / (2.0 * alpha - 1.0)) - alpha / b,
        )
        return float(log_mix) / (alpha - 1.0)

    return RdpCurve(
        name="laplace",
        params=(("b", float(b)),),
        epsilon_fn=epsilon,
        eps_inf=1.0 / b,
        eps_kl=_right_limit(epsilon),
        is_tight=True,
    )


def randresp_rdp(p: float) -> RdpCurve:
    if not 0 < p < 1:
        raise ValueError(f"randomized response p must lie in (0, 1), got {p}")
    log_p, log_q = math.log(p), math.log1p(-p)

    def epsilon(alpha: float) -> float:
        log_mix = np.logaddexp(
            alpha * log_p + (1.0 - alpha) * log_q,
            alpha * log_q + (1.0 - alpha) * log_p,
        )
        return float(log_mix) / (alpha - 1.0)

    return RdpCurve(
        name="randresp",
        params=(("p", float(p)),),
        epsilon_fn=epsilon,
        eps_inf=abs(log_p - log_q),
        eps_kl=_right_limit(epsilon),
        is_tight=True,
    )


def pure_dp_rdp(eps: float) -> RdpCurve:
    """Constant curve ε(α) = eps; conservative unless eps = 0."""
    if not eps >= 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    eps = float(eps)
    return RdpCurve(
        name="puredp",
        params=(("eps", eps),),
        epsilon_fn=lambda alpha: eps,
        eps_inf=eps,
        eps_kl=eps,
        is_tight=eps == 0,
        is_self_consistent=eps == 0,
    )


def _as_function(bound: Bound) -> Callable[[float], float]:
    if bound is None:
        return lambda kappa: INF
    if callable(bound):
        return bound
    value = float(bound)
    return lambda kappa: value


def _bound_param(bound: Bound) -> ParamValue:
    if bound is None or not callable(bound):
        return None if bound is None else float(bound)
    return repr(bound)


def expfamily_rdp(
    delta: float,
    B: Bound = None,
    L: Bound = None,
    kappa_max: float = INF,
    improved: bool = True,
) -> RdpCurve:
    """
    Exponential-family posterior sampling with parameter distance Δ.

    B bounds the Lipschitz constant and L the smoothness of the log-partition
    function within radius κ; None means +inf. The smoothness branch is
    taken at the smallest feasible κ = αΔ since L is nondecreasing. Orders
    beyond κ_max/Δ + 1 are infeasible and evaluate to +inf.

    Returns:
        RdpCurve with name "expfamily".
    """
    if not delta >= 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if not kappa_max >= delta:
        raise ValueError(f"kappa_max must be at least delta, got {kappa_max} < {delta}")

    lipschitz, smoothness = _as_function(B), _as_function(L)
    params = (
        ("delta", float(delta)),
        ("B", _bound_param(B)),
        ("L", _bound_param(L)),
        ("kappa_max", float(kappa_max)),
        ("improved", bool(improved)),
    )

    if delta == 0:
        return RdpCurve("expfamily", params, lambda alpha: 0.0, 0.0, 0.0)

    alpha_max = kappa_max / delta + 1.0

    def epsilon(alpha: float) -> float:
        if alpha > alpha_max:
            return INF
        kappa = min(alpha * delta, kappa_max)
        smooth = alpha * smoothness(kappa) * delta * delta / 2.0
        if improved:
            lip = (lipschitz((alpha - 1.0) * delta) + lipschitz(delta)) * delta
        else:
            lip = 2.0 * lipschitz(kappa) * delta
        return min(smooth, lip)

    return RdpCurve("expfamily", params, epsilon, INF, epsilon(1.0))


CATALOG: Dict[str, Callable[..., RdpCurve]] = {
    "gaussian": gaussian_rdp,
    "laplace": laplace_rdp,
    "randresp": randresp_rdp,
    "puredp": pure_dp_rdp,
    "expfamily": expfamily_rdp,
}


def curve_from_spec(spec: Dict[str, ParamValue]) -> RdpCurve:
    """Build a catalog curve from {"kind": ..., params...}."""
    params = dict(spec)
    kind = params.pop("kind", None)
    if kind not in CATALOG:
        raise ValueError(f"unknown mechanism kind {kind!r}; expected one of {sorted(CATALOG)}")
    return CATALOG[kind](**params)
