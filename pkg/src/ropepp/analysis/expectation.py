"""Monte Carlo checks of the expectation identities behind the curves.

Features are drawn i.i.d. Gaussian with mean ``mu`` and variance
``sigma**2``. The closed forms only use the first two moments, so the
Gaussian choice is a convenience.

* Semantic aggregation: ``E[A(q, q + eps) - A(q, k)]`` with ``k`` an
  independent copy of ``q`` and ``eps`` zero-mean noise equals
  ``2 sigma^2 sum_n cos(theta_n dt)`` (real) or ``... sin(...)`` (imag).
* Mean score: ``E[A(q, q)] = 2 (mu^2 + sigma^2) sum_n cos|sin(theta_n dt)``.
  The moment ``E[q_i k_i] = mu^2 + sigma^2`` only holds for a key equal to
  the query, so that is what gets sampled. For an independent key the
  expectation is ``2 mu^2 sum_n cos|sin``; see ``independent_mean_score``.

``A`` is the real or negative-imaginary score at ``t - s = dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rotary import build_thetas, score_imag_relative, score_real_relative

__all__ = [
    "ExpectationCheck",
    "aggregation_closed_form",
    "mean_score_closed_form",
    "independent_mean_score",
    "mc_aggregation_check",
    "mc_mean_score_check",
]

_CHUNK = 10_000
_MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class ExpectationCheck:
    variant: str
    mu: float
    sigma: float
    d: int
    delta_t: int
    closed_form: float
    mc_estimate: float
    mc_stderr: float
    n_samples: int

    @property
    def z_score(self) -> float:
        diff = self.mc_estimate - self.closed_form
        if self.mc_stderr == 0:
            # degenerate estimand, e.g. the imaginary score of (q, q) at dt=0
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.mc_stderr

    def within(self, n_stderr: float = 4.0) -> bool:
        return abs(self.mc_estimate - self.closed_form) <= n_stderr * self.mc_stderr


def _trig_sum(variant: str, d: int, delta_t, base: float) -> float:
    ang = build_thetas(d, base).thetas * float(delta_t)
    if variant == "real":
        return float(np.cos(ang).sum())
    if variant == "imag":
        return float(np.sin(ang).sum())
    raise ValueError(f"variant must be 'real' or 'imag', got {variant!r}")


def aggregation_closed_form(variant, mu, sigma, d, delta_t, base=10000.0) -> float:
    return 2.0 * sigma**2 * _trig_sum(variant, d, delta_t, base)


def mean_score_closed_form(variant, mu, sigma, d, delta_t, base=10000.0) -> float:
    return 2.0 * (mu**2 + sigma**2) * _trig_sum(variant, d, delta_t, base)


def independent_mean_score(variant, mu, sigma, d, delta_t, base=10000.0) -> float:
    """``E[A(q, k)]`` for independent q, k; the cross terms vanish."""
    return 2.0 * mu**2 * _trig_sum(variant, d, delta_t, base)


def _validate(variant, sigma, d, n_samples):
    if variant not in ("real", "imag"):
        raise ValueError(f"variant must be 'real' or 'imag', got {variant!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if n_samples < _MIN_SAMPLES:
        raise ValueError(f"n_samples must be >= {_MIN_SAMPLES}, got {n_samples}")
    if d < 2 or d % 2:
        raise ValueError(f"d must be even and >= 2, got {d}")


def _run(sample_fn, n_samples: int, seed: int):
    # One child stream per fixed-size chunk keeps results independent of
    # how chunks are scheduled.
    n_chunks = -(-n_samples // _CHUNK)
    streams = np.random.SeedSequence(int(seed)).spawn(n_chunks)
    total = 0.0
    total_sq = 0.0
    for i, ss in enumerate(streams):
        m = min(_CHUNK, n_samples - i * _CHUNK)
        x = sample_fn(np.random.default_rng(ss), m)
        total += float(x.sum())
        total_sq += float(np.square(x).sum())
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def mc_aggregation_check(
    variant: str,
    mu: float,
    sigma: float,
    d: int,
    delta_t: int,
    n_samples: int = 100_000,
    seed: int = 0,
    eps_scale: float = 0.1,
    base: float = 10000.0,
) -> ExpectationCheck:
    """Estimate the similar-minus-unrelated score gap at distance ``delta_t``."""
    _validate(variant, sigma, d, n_samples)
    params = build_thetas(d, base)
    score = score_real_relative if variant == "real" else score_imag_relative

    def sample(rng, m):
        q = rng.normal(mu, sigma, (m, d))
        k = rng.normal(mu, sigma, (m, d))
        eps = rng.normal(0.0, eps_scale * sigma, (m, d))
        return score(q, q + eps, delta_t, params) - score(q, k, delta_t, params)

    mean, stderr = _run(sample, n_samples, seed)
    return ExpectationCheck(
        variant, mu, sigma, d, delta_t,
        aggregation_closed_form(variant, mu, sigma, d, delta_t, base),
        mean, stderr, n_samples,
    )


def mc_mean_score_check(
    variant: str,
    mu: float,
    sigma: float,
    d: int,
    delta_t: int,
    n_samples: int = 100_000,
    seed: int = 0,
    base: float = 10000.0,
) -> ExpectationCheck:
    """Estimate ``E[A(q, q)]`` at distance ``delta_t``."""
    _validate(variant, sigma, d, n_samples)
    params = build_thetas(d, base)
    score = score_real_relative if variant == "real" else score_imag_relative

    def sample(rng, m):
        q = rng.normal(mu, sigma, (m, d))
        return score(q, q, delta_t, params)

    mean, stderr = _run(sample, n_samples, seed)
    return ExpectationCheck(
        variant, mu, sigma, d, delta_t,
        mean_score_closed_form(variant, mu, sigma, d, delta_t, base),
        mean, stderr, n_samples,
    )
