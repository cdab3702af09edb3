"""Randomized agreement battery for the three score forms.

Used by ``ropepp verify`` and the acceptance suite. The report is a plain
dict with no timing fields, so a fixed seed gives a byte-identical report.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .rotary import (
    build_thetas,
    rotate_quarter_pos,
    score_absolute,
    score_complex_oracle,
    score_imag_relative,
    score_real_relative,
)

__all__ = ["VERIFY_SCHEMA", "DEFAULT_SIZES", "equivalence_battery"]

VERIFY_SCHEMA = "ropepp.verify/1"
DEFAULT_SIZES = (2, 8, 64, 128)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / (1.0 + abs(b))


def equivalence_battery(
    seed: int = 0,
    sizes: Sequence[int] = DEFAULT_SIZES,
    n_cases: int = 10_000,
    max_pos: int = 4096,
    tol: float = 1e-10,
) -> dict:
    """Check relative, absolute and oracle forms on ``n_cases`` random cases.

    Also checks the quarter-turn identity (imag of the +pi/2 rotated query
    equals real of the query) and the ``dt = 0`` identities. Deviations are
    ``|x - ref| / (1 + |ref|)`` against the oracle.
    """
    sizes = [int(d) for d in sizes]
    params = {d: build_thetas(d) for d in sizes}
    rng = np.random.default_rng(int(seed))
    keys = [
        "real_relative_vs_oracle",
        "real_absolute_vs_oracle",
        "imag_relative_vs_oracle",
        "imag_absolute_vs_oracle",
        "quarter_turn",
        "zero_offset_dot",
        "zero_offset_self_imag",
    ]
    dev = {k: 0.0 for k in keys}
    for i in range(n_cases):
        d = sizes[i % len(sizes)]
        p = params[d]
        q = rng.standard_normal(d)
        k = rng.standard_normal(d)
        t, s = (int(x) for x in rng.integers(0, max_pos, size=2))
        ref = score_complex_oracle(q, k, t, s, p)
        re_rel = float(score_real_relative(q, k, t - s, p))
        im_rel = float(score_imag_relative(q, k, t - s, p))
        re_abs = float(score_absolute(q, k, t, s, p, "real"))
        im_abs = float(score_absolute(q, k, t, s, p, "imag"))
        quarter = float(score_absolute(rotate_quarter_pos(q), k, t, s, p, "imag"))
        dot = float(q @ k)
        upd = {
            "real_relative_vs_oracle": _rel(re_rel, ref.real),
            "real_absolute_vs_oracle": _rel(re_abs, ref.real),
            "imag_relative_vs_oracle": _rel(im_rel, ref.imag),
            "imag_absolute_vs_oracle": _rel(im_abs, ref.imag),
            "quarter_turn": _rel(quarter, re_abs),
            "zero_offset_dot": _rel(float(score_real_relative(q, k, 0, p)), dot),
            "zero_offset_self_imag": abs(float(score_imag_relative(q, q, 0, p))),
        }
        for key, val in upd.items():
            dev[key] = max(dev[key], val)
    max_dev = max(dev.values())
    return {
        "schema": VERIFY_SCHEMA,
        "seed": int(seed),
        "sizes": sizes,
        "n_cases": int(n_cases),
        "tolerance": tol,
        "max_deviation": dev,
        "max_dev": max_dev,
        "passed": bool(max_dev <= tol),
    }
