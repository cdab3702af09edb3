"""Characteristic curves of the real and imaginary attention channels.

The discrete curve averages ``cos(theta_n * dt)`` (real) or
``sin(theta_n * dt)`` (imaginary) over the rotary schedule. With the
default base 10000, ``theta_n = 10**(-8n/d)`` is uniform in ``ln theta`` on
``[1e-4, 1]``, so the average tends to

    [F(dt) - F(dt / base)] / ln(base),    F = Ci (real) or Si (imag).

The ``1/ln(base)`` factor is kept: it is what makes the integral form
comparable with the discrete average, which is bounded by 1.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from ..rotary import RotaryParams, build_thetas
from .special import cosine_integral, sine_integral

__all__ = [
    "CURVE_KINDS",
    "CURVES_SCHEMA",
    "CurveSample",
    "char_curve",
    "char_curve_real",
    "char_curve_imag",
    "integral_curve",
    "log_grid",
    "curve_samples",
    "write_curves_csv",
]

CURVE_KINDS = ("real_discrete", "imag_discrete", "real_integral", "imag_integral")
CURVES_SCHEMA = "ropepp.curves/1"


@dataclass(frozen=True)
class CurveSample:
    delta_t: float
    value: float
    kind: str


def char_curve(params: RotaryParams, delta_t, kind: str = "real"):
    """Discrete characteristic curve for an arbitrary schedule."""
    dt = np.asarray(delta_t, dtype=np.float64)
    if np.any(dt < 0):
        raise ValueError("delta_t must be >= 0")
    ang = dt[..., None] * params.thetas
    if kind == "real":
        out = np.cos(ang).mean(axis=-1)
    elif kind == "imag":
        out = np.sin(ang).mean(axis=-1)
    else:
        raise ValueError(f"kind must be 'real' or 'imag', got {kind!r}")
    return float(out) if dt.ndim == 0 else out


def char_curve_real(d: int, delta_t, base: float = 10000.0):
    """``(2/d) * sum_n cos(base**(-2n/d) * delta_t)``; equals 1 at 0."""
    return char_curve(build_thetas(d, base), delta_t, "real")


def char_curve_imag(d: int, delta_t, base: float = 10000.0):
    """``(2/d) * sum_n sin(base**(-2n/d) * delta_t)``; equals 0 at 0."""
    return char_curve(build_thetas(d, base), delta_t, "imag")


def integral_curve(kind: str, delta_t, base: float = 10000.0):
    """Continuous limit ``[F(dt) - F(dt/base)] / ln(base)``.

    ``kind="imag"`` accepts ``dt = 0`` (limit 0); ``kind="real"`` needs
    ``dt > 0`` because Ci is singular at the origin.
    """
    dt = np.asarray(delta_t, dtype=np.float64)
    norm = math.log(base)
    if kind == "real":
        if np.any(~(dt > 0)):
            raise ValueError("real integral curve is defined for delta_t > 0 only")
        out = (cosine_integral(dt) - cosine_integral(dt / base)) / norm
    elif kind == "imag":
        if np.any(dt < 0):
            raise ValueError("delta_t must be >= 0")
        out = (sine_integral(dt) - sine_integral(dt / base)) / norm
    else:
        raise ValueError(f"kind must be 'real' or 'imag', got {kind!r}")
    return float(out) if np.ndim(out) == 0 else np.asarray(out)


def log_grid(max_dt: float, points_per_decade: int = 10, include_zero: bool = True) -> np.ndarray:
    """``0`` (optional) followed by log-spaced points on ``[1, max_dt]``."""
    if max_dt < 1:
        raise ValueError(f"max_dt must be >= 1, got {max_dt}")
    decades = math.log10(max_dt)
    n = max(int(math.ceil(decades * points_per_decade)) + 1, 2 if max_dt > 1 else 1)
    pts = np.logspace(0.0, decades, n) if max_dt > 1 else np.array([1.0])
    return np.concatenate([[0.0], pts]) if include_zero else pts


def curve_samples(
    d: int,
    grid: Iterable[float],
    kinds: Sequence[str] = CURVE_KINDS,
    base: float = 10000.0,
) -> list:
    for k in kinds:
        if k not in CURVE_KINDS:
            raise ValueError(f"unknown curve kind {k!r}; choose from {CURVE_KINDS}")
    params = build_thetas(d, base)
    grid = np.asarray(list(grid), dtype=np.float64)
    samples = []
    for k in kinds:
        channel, form = k.split("_")
        if form == "discrete":
            vals = char_curve(params, grid, channel)
            samples.extend(CurveSample(float(t), float(v), k) for t, v in zip(grid, vals))
        else:
            pts = grid[grid > 0] if channel == "real" else grid
            vals = integral_curve(channel, pts, base)
            samples.extend(
                CurveSample(float(t), float(v), k) for t, v in zip(pts, np.atleast_1d(vals))
            )
    return samples


def write_curves_csv(samples: Iterable[CurveSample], out: Optional[TextIO] = None) -> str:
    """Write ``delta_t,kind,value`` rows after a ``# schema`` comment line."""
    buf = io.StringIO()
    buf.write(f"# schema: {CURVES_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta_t", "kind", "value"])
    for s in samples:
        w.writerow([repr(s.delta_t), s.kind, repr(s.value)])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
