"""Rotary frequency schedules, pair rotations and real/imaginary scores.

A head vector of length ``d`` is read as ``d/2`` ordered pairs
``(v[2n], v[2n+1])``; pair ``n`` rotates at frequency ``thetas[n]``.

Every score is available in three forms that must agree:

* relative: cos/sin of ``theta_n * (t - s)`` applied to pair products,
* absolute: rotate q and k by their own positions, then take a dot product,
* complex oracle: explicit complex arithmetic, kept code-disjoint from the
  other two so it can serve as ground truth in tests.

The imaginary score is the *negative* imaginary part of the complex product.
It equals the real score computed with the query pre-rotated by -pi/2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "RotaryParams",
    "ScorePair",
    "AngleMap",
    "build_thetas",
    "rotation_angles",
    "apply_absolute",
    "rotate_quarter_neg",
    "rotate_quarter_pos",
    "score_real_relative",
    "score_imag_relative",
    "score_absolute",
    "score_complex_oracle",
]

# (thetas, positions) -> angles, broadcast like ``positions[..., None] * thetas``.
AngleMap = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RotaryParams:
    """Frequency schedule ``thetas[n] = base ** (-2n / head_dim)``.

    Build with :func:`build_thetas`. ``angle_map`` is an optional
    per-frequency remap hook (used by context-extension schemes); when unset
    the angle is simply ``theta * position``.
    """

    head_dim: int
    base: float
    thetas: np.ndarray = field(repr=False)
    angle_map: Optional[AngleMap] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=np.float64)
        thetas.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)

    @property
    def num_pairs(self) -> int:
        return self.head_dim // 2

    def __eq__(self, other):
        if not isinstance(other, RotaryParams):
            return NotImplemented
        return (
            self.head_dim == other.head_dim
            and self.base == other.base
            and np.array_equal(self.thetas, other.thetas)
            and self.angle_map is other.angle_map
        )

    def __hash__(self):
        return hash((self.head_dim, self.base, self.thetas.tobytes()))


class ScorePair(NamedTuple):
    """Real score and negative-imaginary score for one (t, s) pair."""

    real: float
    imag: float


def build_thetas(head_dim: int, base: float = 10000.0) -> RotaryParams:
    """Build the geometric rotary schedule for an even ``head_dim``.

    >>> build_thetas(4, 10000.0).thetas.tolist()
    [1.0, 0.01]
    """
    if isinstance(head_dim, bool) or not isinstance(head_dim, (int, np.integer)):
        raise ValueError(f"head_dim must be an integer, got {head_dim!r}")
    if head_dim < 2 or head_dim % 2:
        raise ValueError(f"head_dim must be even and >= 2, got {head_dim}")
    base = float(base)
    if not math.isfinite(base) or base <= 1.0:
        raise ValueError(f"base must be > 1, got {base}")
    n = np.arange(head_dim // 2, dtype=np.float64)
    thetas = base ** (-2.0 * n / head_dim)
    return RotaryParams(int(head_dim), base, thetas)


def _check_pairs(v: np.ndarray, params: Optional[RotaryParams] = None) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] % 2:
        raise ValueError(f"vector length must be even, got shape {v.shape}")
    if params is not None and v.shape[-1] != params.head_dim:
        raise ValueError(
            f"vector length {v.shape[-1]} does not match head_dim {params.head_dim}"
        )
    return v


def rotation_angles(params: RotaryParams, positions) -> np.ndarray:
    """Angles ``theta_n * position`` with shape ``positions.shape + (d/2,)``.

    Positions may be real-valued (linear interpolation produces fractional
    effective positions).
    """
    positions = np.asarray(positions, dtype=np.float64)
    if params.angle_map is not None:
        return np.asarray(params.angle_map(params.thetas, positions), dtype=np.float64)
    return positions[..., None] * params.thetas


def _rotate_by(v: np.ndarray, angles: np.ndarray) -> np.ndarray:
    x = v[..., 0::2]
    y = v[..., 1::2]
    c = np.cos(angles)
    s = np.sin(angles)
    out = np.empty(np.broadcast_shapes(v.shape, angles.shape[:-1] + v.shape[-1:]))
    out[..., 0::2] = x * c - y * s
    out[..., 1::2] = x * s + y * c
    return out


def apply_absolute(v, t, params: RotaryParams) -> np.ndarray:
    """Rotate every pair of ``v`` counter-clockwise by ``theta_n * t``.

    ``v`` has shape ``(..., d)``; ``t`` is a scalar or broadcasts against
    ``v.shape[:-1]``.
    """
    v = _check_pairs(v, params)
    return _rotate_by(v, rotation_angles(params, t))


def rotate_quarter_neg(v) -> np.ndarray:
    """Rotate every pair by -pi/2: ``(x, y) -> (y, -x)``. Exact, no trig."""
    v = _check_pairs(v)
    out = np.empty_like(v)
    out[..., 0::2] = v[..., 1::2]
    out[..., 1::2] = -v[..., 0::2]
    return out


def rotate_quarter_pos(v) -> np.ndarray:
    """Rotate every pair by +pi/2: ``(x, y) -> (-y, x)``."""
    v = _check_pairs(v)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def _pair_products(q: np.ndarray, k: np.ndarray):
    # same: q_e k_e + q_o k_o ; cross: q_e k_o - q_o k_e
    same = q[..., 0::2] * k[..., 0::2] + q[..., 1::2] * k[..., 1::2]
    cross = q[..., 0::2] * k[..., 1::2] - q[..., 1::2] * k[..., 0::2]
    return same, cross


def _check_qk(q, k, params):
    q = _check_pairs(q, params)
    k = _check_pairs(k, params)
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"q and k lengths differ: {q.shape[-1]} vs {k.shape[-1]}")
    return q, k


def score_real_relative(q, k, delta_t, params: RotaryParams):
    """Real score from the relative form, ``delta_t = t - s``."""
    q, k = _check_qk(q, k, params)
    same, cross = _pair_products(q, k)
    ang = rotation_angles(params, delta_t)
    return np.sum(same * np.cos(ang) + cross * np.sin(ang), axis=-1)


def score_imag_relative(q, k, delta_t, params: RotaryParams):
    """Negative-imaginary score from the relative form, ``delta_t = t - s``."""
    q, k = _check_qk(q, k, params)
    same, cross = _pair_products(q, k)
    ang = rotation_angles(params, delta_t)
    return np.sum(same * np.sin(ang) - cross * np.cos(ang), axis=-1)


def score_absolute(q, k, t, s, params: RotaryParams, which: str = "real"):
    """Score via absolute rotations of q (at ``t``) and k (at ``s``).

    ``which="imag"`` pre-rotates q by -pi/2 before embedding it.
    """
    q, k = _check_qk(q, k, params)
    if which == "imag":
        q = rotate_quarter_neg(q)
    elif which != "real":
        raise ValueError(f"which must be 'real' or 'imag', got {which!r}")
    return np.sum(apply_absolute(q, t, params) * apply_absolute(k, s, params), axis=-1)


def score_complex_oracle(q, k, t, s, params: RotaryParams) -> ScorePair:
    """Ground-truth (real, -imag) score by scalar complex arithmetic.

    Each pair becomes ``z = v[2n] + i v[2n+1]``; q and k are multiplied by
    ``exp(i theta_n t)`` and ``exp(i theta_n s)`` and the sum of
    ``conj(q_rot) * k_rot`` is returned as ``(Re, -Im)``. Shares no code
    with the rotation-form scorers.
    """
    qs = [float(x) for x in np.ravel(q)]
    ks = [float(x) for x in np.ravel(k)]
    if len(qs) != len(ks) or len(qs) != params.head_dim:
        raise ValueError(
            f"q, k must both have length {params.head_dim}, got {len(qs)} and {len(ks)}"
        )
    if params.angle_map is None:
        phases_t = [theta * float(t) for theta in params.thetas.tolist()]
        phases_s = [theta * float(s) for theta in params.thetas.tolist()]
    else:
        phases_t = np.ravel(params.angle_map(params.thetas, np.float64(t))).tolist()
        phases_s = np.ravel(params.angle_map(params.thetas, np.float64(s))).tolist()
    acc_re = 0.0
    acc_im = 0.0
    for n in range(params.head_dim // 2):
        zq = complex(qs[2 * n], qs[2 * n + 1]) * cmath.exp(1j * phases_t[n])
        zk = complex(ks[2 * n], ks[2 * n + 1]) * cmath.exp(1j * phases_s[n])
        prod = zq.conjugate() * zk
        acc_re += prod.real
        acc_im += prod.imag
    return ScorePair(acc_re, -acc_im)
