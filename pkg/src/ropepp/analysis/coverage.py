"""Which positional multipliers each query/key product sees during training.

Expanding the scores per frequency ``n`` with angle ``x = theta_n * dt``:

=============  ========  ========
term           real      imag
=============  ========  ========
q_even*k_even  cos x     sin x
q_even*k_odd   sin x     -cos x
q_odd*k_even   -sin x    cos x
q_odd*k_odd    cos x     sin x
=============  ========  ========

Over a training window ``dt in {0, ..., L-1}`` each multiplier attains a
finite set of values. RoPE only has the real column; RoPE++ has both, so its
attained set is the union. A value counts as reaching +-1 when it lies
within ``FULL_RANGE_TOL`` of it on the integer grid.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from ..rotary import RotaryParams

__all__ = [
    "TERMS",
    "COVERAGE_SCHEMA",
    "FULL_RANGE_TOL",
    "CoverageEntry",
    "FrequencySummary",
    "CoverageReport",
    "multiplier",
    "coverage_map",
    "full_range_onset",
    "write_coverage_csv",
]

TERMS = ("q_even*k_even", "q_even*k_odd", "q_odd*k_even", "q_odd*k_odd")
COVERAGE_SCHEMA = "ropepp.coverage/1"
FULL_RANGE_TOL = 1e-3

# term -> channel -> (sign, function)
_TABLE = {
    "q_even*k_even": {"real": (1, "cos"), "imag": (1, "sin")},
    "q_even*k_odd": {"real": (1, "sin"), "imag": (-1, "cos")},
    "q_odd*k_even": {"real": (-1, "sin"), "imag": (1, "cos")},
    "q_odd*k_odd": {"real": (1, "cos"), "imag": (1, "sin")},
}
_UNION = "real+imag"


def _normalize(variant: str) -> str:
    v = str(variant).lower().replace("+", "p")
    if v in ("rope",):
        return "rope"
    if v in ("ropepp", "roppp", "eh", "ec"):
        return "ropepp"
    raise ValueError(f"variant must be 'rope' or 'ropepp', got {variant!r}")


def _channels(variant: str):
    return ("real",) if variant == "rope" else ("real", "imag")


def multiplier(term: str, channel: str, angle) -> np.ndarray:
    """Signed cos/sin factor multiplying ``term`` in ``channel``."""
    sign, fn = _TABLE[term][channel]
    return sign * (np.cos(angle) if fn == "cos" else np.sin(angle))


def _flags(values: np.ndarray, tol: float):
    return (
        bool((values < 0).any()),
        bool(values.max() >= 1 - tol and values.min() <= -1 + tol),
    )


@dataclass
class CoverageEntry:
    n: int
    theta: float
    term: str
    channel: str  # "real", "imag" or "real+imag"
    values: np.ndarray = field(repr=False)
    saw_negative: bool = False
    saw_full_range: bool = False

    @property
    def lo(self) -> float:
        return float(self.values.min())

    @property
    def hi(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class FrequencySummary:
    """Per-frequency flags pooled over terms.

    ``full_range_all_terms``: every term's attained set reaches both +1
    and -1. ``full_range_by_family``: pooling all terms and channels, the
    cosine multipliers (+-cos) and the sine multipliers (+-sin) each reach
    both +1 and -1.
    """

    n: int
    theta: float
    saw_negative_any: bool
    saw_negative_all_terms: bool
    full_range_all_terms: bool
    full_range_by_family: bool


@dataclass
class CoverageReport:
    variant: str
    train_len: int
    head_dim: int
    base: float
    entries: list
    tol: float = FULL_RANGE_TOL

    def entry(self, n: int, term: str, channel: Optional[str] = None) -> CoverageEntry:
        """Entry for ``(n, term)``; by default the variant's combined row."""
        if channel is None:
            channel = "real" if self.variant == "rope" else _UNION
        for e in self.entries:
            if e.n == n and e.term == term and e.channel == channel:
                return e
        raise KeyError((n, term, channel))

    def attained(self, n: int, term: str) -> np.ndarray:
        return self.entry(n, term).values

    def summary(self, n: int) -> FrequencySummary:
        combined = [self.entry(n, t) for t in TERMS]
        families = {"cos": [], "sin": []}
        for t in TERMS:
            for ch in _channels(self.variant):
                fn = _TABLE[t][ch][1]
                families[fn].append(self.entry(n, t, ch).values)
        fam_full = all(
            _flags(np.concatenate(vals), self.tol)[1] for vals in families.values()
        )
        return FrequencySummary(
            n=n,
            theta=combined[0].theta,
            saw_negative_any=any(e.saw_negative for e in combined),
            saw_negative_all_terms=all(e.saw_negative for e in combined),
            full_range_all_terms=all(e.saw_full_range for e in combined),
            full_range_by_family=fam_full,
        )

    def summaries(self) -> list:
        n_freq = self.head_dim // 2
        return [self.summary(n) for n in range(n_freq)]


def coverage_map(
    params: RotaryParams,
    train_len: int,
    variant: str = "ropepp",
    tol: float = FULL_RANGE_TOL,
) -> CoverageReport:
    """Attained multiplier values over ``dt in {0, ..., train_len - 1}``."""
    if train_len < 2:
        raise ValueError(f"train_len must be >= 2, got {train_len}")
    variant = _normalize(variant)
    dt = np.arange(train_len, dtype=np.float64)
    entries = []
    for n, theta in enumerate(params.thetas):
        angle = theta * dt
        for term in TERMS:
            per_channel = []
            for ch in _channels(variant):
                vals = multiplier(term, ch, angle)
                neg, full = _flags(vals, tol)
                entries.append(CoverageEntry(n, float(theta), term, ch, vals, neg, full))
                per_channel.append(vals)
            if variant == "ropepp":
                vals = np.concatenate(per_channel)
                neg, full = _flags(vals, tol)
                entries.append(CoverageEntry(n, float(theta), term, _UNION, vals, neg, full))
    return CoverageReport(variant, int(train_len), params.head_dim, params.base, entries, tol)


def full_range_onset(
    theta: float,
    variant: str,
    max_len: int,
    tol: float = FULL_RANGE_TOL,
    by_family: bool = True,
) -> Optional[int]:
    """Smallest ``L <= max_len`` whose window gives a full-range frequency.

    Returns None when the window never suffices up to ``max_len``.
    """
    variant = _normalize(variant)
    dt = np.arange(max_len, dtype=np.float64)
    angle = theta * dt
    groups = []
    if by_family:
        for fn in ("cos", "sin"):
            groups.append(
                [
                    multiplier(t, ch, angle)
                    for t in TERMS
                    for ch in _channels(variant)
                    if _TABLE[t][ch][1] == fn
                ]
            )
    else:
        for t in TERMS:
            groups.append([multiplier(t, ch, angle) for ch in _channels(variant)])
    # earliest index at which each group has reached +1 and -1
    onset = 0
    for funcs in groups:
        stacked = np.vstack(funcs)
        hit_hi = np.flatnonzero((stacked >= 1 - tol).any(axis=0))
        hit_lo = np.flatnonzero((stacked <= -1 + tol).any(axis=0))
        if hit_hi.size == 0 or hit_lo.size == 0:
            return None
        onset = max(onset, int(hit_hi[0]), int(hit_lo[0]))
    return max(onset + 1, 2)


def write_coverage_csv(report: CoverageReport, out: Optional[TextIO] = None) -> str:
    buf = io.StringIO()
    buf.write(
        f"# schema: {COVERAGE_SCHEMA} variant={report.variant} "
        f"train_len={report.train_len} d={report.head_dim} base={report.base!r}\n"
    )
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "theta", "term", "channel", "lo", "hi", "saw_negative", "saw_full_range"])
    for e in report.entries:
        w.writerow(
            [e.n, repr(e.theta), e.term, e.channel, repr(e.lo), repr(e.hi),
             str(e.saw_negative).lower(), str(e.saw_full_range).lower()]
        )
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
