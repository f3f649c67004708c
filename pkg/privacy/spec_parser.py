"""
SubsampledRDP — Run Input Parser
Turns the CLI's textual inputs into validated values:
  - mechanism specs:  {"kind": "gaussian", "sigma": 5}
  - α grids:          "2:256", "2:64:2", "log:1.1:256:32", "1.5,2,2.5" (mixable)
  - bound kind lists: "general,lower"
"""

import json
from typing import Dict, List, Tuple, Union

import numpy as np

from privacy.amplification import BOUND_KINDS
from privacy.mechanisms import RdpCurve, curve_from_spec

# ─── Parameter maps ───────────────────────────────────────────────────────────

MECHANISM_PARAMS: Dict[str, Tuple[str, ...]] = {
    "gaussian": ("sigma",),
    "laplace": ("b",),
    "randresp": ("p",),
    "puredp": ("eps",),
    "expfamily": ("delta",),
}

OPTIONAL_PARAMS: Dict[str, Tuple[str, ...]] = {
    "expfamily": ("B", "L", "kappa_max", "improved"),
}

DEFAULT_ALPHA_GRID = "2:256,log:1.1:256:32"
DEFAULT_BOUNDS = ("general", "lower")


class SpecError(ValueError):
    """Malformed run input."""


# ─── Mechanism specs ──────────────────────────────────────────────────────────


def parse_mechanism_spec(raw: Union[str, dict]) -> dict:
    """
    Validate a mechanism spec given as JSON text or an already-decoded dict.

    Returns:
        dict with "kind" plus exactly the parameters that kind accepts,
        numbers as floats ("inf" strings become float infinities).
    """
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as e:
            raise SpecError(f"mechanism spec is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise SpecError(f"mechanism spec must be a JSON object, got {type(raw).__name__}")

    kind = raw.get("kind")
    if kind not in MECHANISM_PARAMS:
        raise SpecError(f"unknown mechanism kind {kind!r}; expected one of {sorted(MECHANISM_PARAMS)}")

    required = MECHANISM_PARAMS[kind]
    allowed = set(required) | set(OPTIONAL_PARAMS.get(kind, ())) | {"kind"}
    missing = [name for name in required if name not in raw]
    extra = sorted(set(raw) - allowed)
    if missing:
        raise SpecError(f"{kind} spec is missing {missing}")
    if extra:
        raise SpecError(f"{kind} spec has unknown parameters {extra}")

    spec = {"kind": kind}
    for name, value in raw.items():
        if name == "kind":
            continue
        if name == "improved":
            spec[name] = bool(value)
        elif value is None:
            spec[name] = None
        else:
            try:
                spec[name] = float(value)
            except (TypeError, ValueError) as e:
                raise SpecError(f"{kind} parameter {name}={value!r} is not a number") from e
    return spec


def build_curve(raw: Union[str, dict]) -> RdpCurve:
    spec = parse_mechanism_spec(raw)
    try:
        return curve_from_spec(spec)
    except ValueError as e:
        raise SpecError(str(e)) from e


# ─── α grids ──────────────────────────────────────────────────────────────────


def _parse_segment(segment: str) -> List[float]:
    parts = segment.split(":")
    if parts[0] == "log":
        if len(parts) != 4:
            raise SpecError(f"log segment must be log:start:stop:count, got {segment!r}")
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
        if count < 1 or not 0 < start <= stop:
            raise SpecError(f"bad log segment {segment!r}")
        return list(np.geomspace(start, stop, count))
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) in (2, 3):
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        if step < 1 or stop < start:
            raise SpecError(f"bad range segment {segment!r}")
        return [float(a) for a in range(start, stop + 1, step)]
    raise SpecError(f"cannot parse grid segment {segment!r}")


def parse_alpha_grid(text: str = DEFAULT_ALPHA_GRID) -> List[float]:
    """Merge comma-separated segments into a sorted, deduplicated grid of orders > 1."""
    points = set()
    for segment in (s.strip() for s in text.split(",")):
        if not segment:
            continue
        try:
            values = _parse_segment(segment)
        except ValueError as e:
            raise SpecError(f"cannot parse grid segment {segment!r}: {e}") from e
        # Log-spaced points land on integers only by accident; keep them exact.
        points.update(float(round(v)) if abs(v - round(v)) < 1e-9 else float(v) for v in values)
    if not points:
        raise SpecError("alpha grid is empty")
    grid = sorted(points)
    if grid[0] <= 1:
        raise SpecError(f"alpha grid must stay above 1, got {grid[0]}")
    return grid


def parse_bound_kinds(text: str) -> Tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    unknown = [k for k in kinds if k not in BOUND_KINDS]
    if unknown or not kinds:
        raise SpecError(f"unknown bound kinds {unknown}; expected a subset of {BOUND_KINDS}")
    return kinds
