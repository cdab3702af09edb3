"""Context-extension transforms applied before scoring.

Two transforms are provided: rebasing the rotary schedule (NTK-style) and
linear position interpolation. Both feed one theta table shared by the real
and imaginary channels. ``with_angle_map`` is the extension point for
per-frequency schemes such as YaRN, which are not implemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .rotary import AngleMap, RotaryParams, build_thetas

__all__ = [
    "ScalingSpec",
    "ntk_rebase",
    "linear_pi",
    "with_angle_map",
    "apply_scaling",
]

_KINDS = ("none", "ntk_rebase", "linear_pi")


@dataclass(frozen=True)
class ScalingSpec:
    kind: str = "none"
    new_base: Optional[float] = None
    factor: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"scaling kind must be one of {_KINDS}, got {self.kind!r}")
        if self.kind == "ntk_rebase":
            if self.new_base is None or self.factor is not None:
                raise ValueError("ntk_rebase takes new_base only")
            if not self.new_base > 1:
                raise ValueError(f"new_base must be > 1, got {self.new_base}")
        elif self.kind == "linear_pi":
            if self.factor is None or self.new_base is not None:
                raise ValueError("linear_pi takes factor only")
            if not self.factor >= 1:
                raise ValueError(f"factor must be >= 1, got {self.factor}")
        elif self.new_base is not None or self.factor is not None:
            raise ValueError("scaling kind 'none' takes no parameters")


def ntk_rebase(params: RotaryParams, new_base: float) -> RotaryParams:
    """Rebuild the schedule with a larger base (e.g. 10000 -> 500000)."""
    new_base = float(new_base)
    if not math.isfinite(new_base) or new_base <= 1.0:
        raise ValueError(f"new_base must be > 1, got {new_base}")
    if new_base == params.base:
        return params
    out = build_thetas(params.head_dim, new_base)
    if params.angle_map is not None:
        out = replace(out, angle_map=params.angle_map)
    return out


def linear_pi(position, s: float):
    """Effective position ``position / s`` for linear interpolation."""
    s = float(s)
    if not s >= 1.0:
        raise ValueError(f"interpolation factor must be >= 1, got {s}")
    if s == 1.0:
        return position
    return np.asarray(position, dtype=np.float64) / s


def with_angle_map(params: RotaryParams, angle_map: AngleMap) -> RotaryParams:
    """Attach a ``(thetas, positions) -> angles`` remap to ``params``."""
    return replace(params, angle_map=angle_map)


def apply_scaling(spec: ScalingSpec, params: RotaryParams, positions):
    """Return ``(params, positions)`` after applying ``spec``."""
    if spec.kind == "ntk_rebase":
        return ntk_rebase(params, spec.new_base), positions
    if spec.kind == "linear_pi":
        return params, linear_pi(positions, spec.factor)
    return params, positions
