"""KV-cache, parameter and multiply-add accounting per head layout, plus a
desk-scale decode micro-benchmark.

All quantities cover the attention block only (no MLP, embeddings or
activations).
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .attention import HeadLayout, build_layout, expand_queries, normalize_variant
from .rotary import apply_absolute, build_thetas

__all__ = [
    "ModelConfig",
    "MODEL_PRESETS",
    "Budget",
    "FlopCount",
    "BenchRow",
    "BenchReport",
    "BUDGET_SCHEMA",
    "BENCH_SCHEMA",
    "layout_for",
    "kv_cache_bytes",
    "projection_params",
    "score_flops",
    "budget",
    "bench_attend",
]

BUDGET_SCHEMA = "ropepp.budget/1"
BENCH_SCHEMA = "ropepp.bench/1"
_DTYPES = {2: np.float16, 4: np.float32, 8: np.float64}


@dataclass(frozen=True)
class ModelConfig:
    name: str
    hidden: int
    intermediate: int
    layers: int
    attn_heads: int
    kv_heads: int
    vocab: int

    def __post_init__(self):
        for f in ("hidden", "intermediate", "layers", "attn_heads", "kv_heads", "vocab"):
            v = getattr(self, f)
            if int(v) != v or v < 1:
                raise ValueError(f"{f} must be a positive integer, got {v}")
        if self.hidden % self.attn_heads:
            raise ValueError(
                f"hidden ({self.hidden}) must be divisible by attn_heads ({self.attn_heads})"
            )
        if self.attn_heads % self.kv_heads:
            raise ValueError(
                f"attn_heads ({self.attn_heads}) must be divisible by kv_heads ({self.kv_heads})"
            )

    @property
    def head_dim(self) -> int:
        return self.hidden // self.attn_heads


# Model sizes used for the pre-training runs.
MODEL_PRESETS = {
    "376M": ModelConfig("376M", 1024, 3584, 8, 8, 4, 128256),
    "776M": ModelConfig("776M", 1536, 5376, 12, 12, 6, 128256),
    "1.5B": ModelConfig("1.5B", 2048, 7168, 16, 16, 4, 128256),
}


def layout_for(config: ModelConfig, variant: str) -> HeadLayout:
    return build_layout(variant, config.attn_heads, config.kv_heads, config.head_dim)


def kv_cache_bytes(config: ModelConfig, variant: str, dtype_bytes: int = 2) -> int:
    """K and V cache bytes per token across all layers."""
    if dtype_bytes < 1:
        raise ValueError(f"dtype_bytes must be >= 1, got {dtype_bytes}")
    lay = layout_for(config, variant)
    return 2 * config.layers * lay.kv_heads * lay.head_dim * dtype_bytes


def projection_params(config: ModelConfig, variant: str) -> dict:
    """Per-layer weight counts of the four attention projections."""
    lay = layout_for(config, variant)
    return {
        "wq": config.hidden * lay.q_width,
        "wk": config.hidden * lay.kv_width,
        "wv": config.hidden * lay.kv_width,
        "wo": lay.o_width * config.hidden,
    }


@dataclass(frozen=True)
class FlopCount:
    """Multiply-adds to decode one token at context length ``seq``."""

    seq: int
    logits: int
    weighted_sum: int
    q_proj: int
    kv_proj: int
    o_proj: int

    @property
    def attention(self) -> int:
        return self.logits + self.weighted_sum

    @property
    def total(self) -> int:
        return self.logits + self.weighted_sum + self.q_proj + self.kv_proj + self.o_proj


def score_flops(config: ModelConfig, variant: str, seq: int) -> FlopCount:
    if seq < 1:
        raise ValueError(f"seq must be >= 1, got {seq}")
    lay = layout_for(config, variant)
    L, h, d = config.layers, config.hidden, lay.head_dim
    return FlopCount(
        seq=int(seq),
        logits=L * lay.output_heads * seq * d,
        weighted_sum=L * lay.output_heads * seq * d,
        q_proj=L * h * lay.q_width,
        kv_proj=2 * L * h * lay.kv_width,
        o_proj=L * lay.o_width * h,
    )


@dataclass(frozen=True)
class Budget:
    config: str
    variant: str
    dtype_bytes: int
    kv_bytes_per_token: int
    params_wq: int
    params_wk: int
    params_wv: int
    params_wo: int
    _model: ModelConfig = field(repr=False, compare=False)

    @property
    def params_qkv(self) -> int:
        return self.params_wq + self.params_wk + self.params_wv

    @property
    def params_attention(self) -> int:
        return self.params_qkv + self.params_wo

    def score_flops(self, seq: int) -> FlopCount:
        return score_flops(self._model, self.variant, seq)

    def kv_bytes(self, seq: int) -> int:
        return self.kv_bytes_per_token * seq

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if not k.startswith("_")}
        out["params_qkv"] = self.params_qkv
        out["params_attention"] = self.params_attention
        return out


def budget(config: ModelConfig, variant: str, dtype_bytes: int = 2) -> Budget:
    variant = normalize_variant(variant)
    p = projection_params(config, variant)
    return Budget(
        config=config.name,
        variant=variant,
        dtype_bytes=dtype_bytes,
        kv_bytes_per_token=kv_cache_bytes(config, variant, dtype_bytes),
        params_wq=p["wq"],
        params_wk=p["wk"],
        params_wv=p["wv"],
        params_wo=p["wo"],
        _model=config,
    )


@dataclass(frozen=True)
class BenchRow:
    seq: int
    tpot_us: float
    kv_bytes: int
    flops: int


@dataclass
class BenchReport:
    config: str
    variant: str
    rows: list
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "schema": BENCH_SCHEMA,
            "config": self.config,
            "variant": self.variant,
            "rows": [asdict(r) for r in self.rows],
            "metadata": self.metadata,
        }


def _decode_step(q, k_cache, v_cache, layout: HeadLayout, params, pos: int, compute=np.float32):
    # One query token against a cache of already-rotated keys, per layer.
    kv_idx = layout.kv_index()
    scale = compute(1.0 / math.sqrt(layout.head_dim))
    out = None
    for layer in range(k_cache.shape[0]):
        qh = expand_queries(q[layer], layout.variant)
        qr = apply_absolute(qh, pos, params).astype(compute)
        k = k_cache[layer].astype(compute)  # (S, G, d)
        v = v_cache[layer].astype(compute)
        logits = np.einsum("od,sod->os", qr, k[:, kv_idx, :]) * scale
        logits -= logits.max(axis=-1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=-1, keepdims=True)
        out = np.einsum("os,sod->od", p, v[:, kv_idx, :])
    return out


def bench_attend(
    config: ModelConfig,
    variant: str,
    seq_lengths: Iterable[int],
    repeats: int = 5,
    seed: int = 0,
    dtype_bytes: int = 2,
    base: float = 10000.0,
    compute_bits: int = 32,
) -> BenchReport:
    """Median wall-clock per decoded token against a KV cache of each length.

    The cache arrays are really allocated; ``kv_bytes`` is their measured
    ``nbytes``. Runs single-threaded. Timings are hardware-dependent.
    """
    variant = normalize_variant(variant)
    seqs = [int(s) for s in seq_lengths]
    if seqs != sorted(seqs) or not seqs or seqs[0] < 1:
        raise ValueError("seq_lengths must be non-empty, positive and ascending")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if dtype_bytes not in _DTYPES:
        raise ValueError(f"dtype_bytes must be one of {sorted(_DTYPES)}, got {dtype_bytes}")
    if compute_bits not in (32, 64):
        raise ValueError(f"compute_bits must be 32 or 64, got {compute_bits}")
    compute = np.float32 if compute_bits == 32 else np.float64
    dtype = _DTYPES[dtype_bytes]
    lay = layout_for(config, variant)
    params = build_thetas(lay.head_dim, base)
    rows = []
    with threadpool_limits(limits=1):
        for i, seq in enumerate(seqs):
            rng = np.random.default_rng([int(seed), i])
            shape = (config.layers, seq, lay.kv_heads, lay.head_dim)
            k_cache = rng.standard_normal(shape, dtype=np.float32).astype(dtype)
            v_cache = rng.standard_normal(shape, dtype=np.float32).astype(dtype)
            q = rng.standard_normal((config.layers, lay.physical_q_heads, lay.head_dim))
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                _decode_step(q, k_cache, v_cache, lay, params, seq - 1, compute)
                times.append(time.perf_counter() - t0)
            rows.append(
                BenchRow(
                    seq=seq,
                    tpot_us=statistics.median(times) * 1e6,
                    kv_bytes=int(k_cache.nbytes + v_cache.nbytes),
                    flops=score_flops(config, variant, seq).total,
                )
            )
    metadata = {
        "threads": 1,
        "dtype_bytes": dtype_bytes,
        "compute_bits": compute_bits,
        "repeats": repeats,
        "seed": int(seed),
        "scope": "attention block only; no MLP, embeddings or activation memory",
        "flops_unit": "multiply-adds per decoded token",
    }
    return BenchReport(config.name, variant, rows, metadata)
