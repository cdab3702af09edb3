"""Grouped-query attention with RoPE and the two RoPE++ head layouts.

Layouts, for a reference model with ``H`` query heads and ``G`` KV heads:

======  ===============  ============  ========
layout  physical q heads output heads  KV heads
======  ===============  ============  ========
rope    H                H             G
ec      H                2H            G
eh      H/2              H             G/2
======  ===============  ============  ========

Under ``ec`` and ``eh`` every physical query head ``h`` yields two output
heads: ``2h`` (real, the query as projected) and ``2h + 1`` (imaginary, the
query rotated by -pi/2). Both twins share the query projection columns and
read the same K/V group. The attention scale ``1/sqrt(d)`` is applied to
both channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rotary import RotaryParams, apply_absolute, rotate_quarter_neg

__all__ = [
    "VARIANTS",
    "HeadLayout",
    "ProjectionSet",
    "NoiseSpec",
    "AttentionResult",
    "LayerOutput",
    "normalize_variant",
    "build_layout",
    "generate_weights",
    "imag_output_rows",
    "expand_queries",
    "inject_noise",
    "attend",
    "project_output",
    "attention_layer",
]

VARIANTS = ("rope", "eh", "ec")


def normalize_variant(variant: str) -> str:
    v = str(variant).strip().lower().replace("rope++_", "").replace("ropepp_", "")
    if v not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return v


@dataclass(frozen=True)
class HeadLayout:
    variant: str
    base_heads: int
    base_kv_heads: int
    head_dim: int
    physical_q_heads: int
    output_heads: int
    kv_heads: int
    group_size: int  # output heads sharing one KV head

    @property
    def imaginary(self) -> bool:
        """True when heads come in real/imaginary twins."""
        return self.variant != "rope"

    @property
    def q_width(self) -> int:
        return self.physical_q_heads * self.head_dim

    @property
    def kv_width(self) -> int:
        return self.kv_heads * self.head_dim

    @property
    def o_width(self) -> int:
        return self.output_heads * self.head_dim

    def is_imag_head(self, out_head: int) -> bool:
        return self.imaginary and out_head % 2 == 1

    def physical_head(self, out_head: int) -> int:
        return out_head // 2 if self.imaginary else out_head

    def kv_head(self, out_head: int) -> int:
        return out_head // self.group_size

    def kv_index(self) -> np.ndarray:
        return np.arange(self.output_heads) // self.group_size


def build_layout(variant: str, base_heads: int, base_kv_heads: int, head_dim: int) -> HeadLayout:
    """Derive head counts for ``variant`` from the reference RoPE config."""
    variant = normalize_variant(variant)
    for name, val in (("base_heads", base_heads), ("base_kv_heads", base_kv_heads)):
        if int(val) != val or val < 1:
            raise ValueError(f"{name} must be a positive integer, got {val}")
    if head_dim < 2 or head_dim % 2:
        raise ValueError(f"head_dim must be even and >= 2, got {head_dim}")
    if base_heads % base_kv_heads:
        raise ValueError(
            f"base_heads ({base_heads}) must be divisible by base_kv_heads ({base_kv_heads})"
        )
    H, G = int(base_heads), int(base_kv_heads)
    if variant == "rope":
        phys, out, kv = H, H, G
    elif variant == "ec":
        phys, out, kv = H, 2 * H, G
    else:
        if H % 2:
            raise ValueError(f"eh layout requires even base_heads, got {H}")
        if G % 2:
            raise ValueError(f"eh layout requires even base_kv_heads, got {G}")
        phys, out, kv = H // 2, H, G // 2
    return HeadLayout(variant, H, G, int(head_dim), phys, out, kv, out // kv)


@dataclass
class ProjectionSet:
    """Bias-free projections. There is exactly one query projection; the
    imaginary heads reuse its columns."""

    w_q: np.ndarray  # [hidden, physical_q_heads * d]
    w_k: np.ndarray  # [hidden, kv_heads * d]
    w_v: np.ndarray  # [hidden, kv_heads * d]
    w_o: np.ndarray  # [output_heads * d, hidden]

    @property
    def hidden(self) -> int:
        return self.w_q.shape[0]

    def check(self, layout: HeadLayout) -> None:
        h = self.hidden
        expected = {
            "w_q": (h, layout.q_width),
            "w_k": (h, layout.kv_width),
            "w_v": (h, layout.kv_width),
            "w_o": (layout.o_width, h),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, layout needs {shape}")


def generate_weights(layout: HeadLayout, hidden: int, seed: int) -> ProjectionSet:
    """Deterministic Gaussian weights.

    Each matrix has its own child stream, so ``rope`` and ``ec`` get
    bit-identical ``w_q``, ``w_k`` and ``w_v`` from one seed. ``w_o`` rows
    for real heads come from one stream and rows for imaginary heads from
    another, both scaled by ``1/sqrt(physical_q_heads * d)``; the real rows
    of an ``ec`` draw therefore equal the whole ``w_o`` of the ``rope`` draw.
    """
    streams = np.random.SeedSequence(int(seed)).spawn(5)

    def draw(ss, rows, cols, fan_in):
        return np.random.default_rng(ss).standard_normal((rows, cols)) / math.sqrt(fan_in)

    d = layout.head_dim
    real_o = draw(streams[3], layout.q_width, hidden, layout.q_width)
    if layout.imaginary:
        imag_o = draw(streams[4], layout.q_width, hidden, layout.q_width)
        w_o = np.stack(
            [real_o.reshape(-1, d, hidden), imag_o.reshape(-1, d, hidden)], axis=1
        ).reshape(layout.o_width, hidden)
    else:
        w_o = real_o
    return ProjectionSet(
        w_q=draw(streams[0], hidden, layout.q_width, hidden),
        w_k=draw(streams[1], hidden, layout.kv_width, hidden),
        w_v=draw(streams[2], hidden, layout.kv_width, hidden),
        w_o=w_o,
    )


def imag_output_rows(layout: HeadLayout) -> np.ndarray:
    """Boolean mask over ``w_o`` rows that read imaginary heads."""
    heads = np.arange(layout.o_width) // layout.head_dim
    return np.array([layout.is_imag_head(int(h)) for h in heads], dtype=bool)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_real: float = 0.0
    sigma_imag: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma_real >= 0 and self.sigma_imag >= 0):
            raise ValueError(
                f"noise sigmas must be >= 0, got {self.sigma_real}, {self.sigma_imag}"
            )


def expand_queries(q: np.ndarray, variant: str) -> np.ndarray:
    """Interleave each query head with its -pi/2 rotated twin.

    ``q`` has shape ``(..., heads, d)``. For ``rope`` it is returned as-is.
    """
    variant = normalize_variant(variant)
    q = np.asarray(q, dtype=np.float64)
    if variant == "rope":
        return q
    if q.ndim < 2:
        raise ValueError("queries need a head axis: shape (..., heads, d)")
    pair = np.stack([q, rotate_quarter_neg(q)], axis=-2)
    return pair.reshape(q.shape[:-2] + (2 * q.shape[-2], q.shape[-1]))


def inject_noise(
    logits: np.ndarray,
    spec: NoiseSpec,
    head: int,
    imaginary: bool,
    mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Add Gaussian noise to one head's ``(T, S)`` logits.

    The draw for row ``t`` comes from a stream keyed on ``(seed, head, t)``,
    so values do not depend on how heads or rows are scheduled. Entries where
    ``mask`` is False are left untouched.
    """
    sigma = spec.sigma_imag if imaginary else spec.sigma_real
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    logits = np.asarray(logits, dtype=np.float64)
    if sigma == 0:
        return logits
    out = logits.copy()
    for t in range(out.shape[0]):
        rng = np.random.default_rng([int(spec.seed) & 0xFFFFFFFFFFFFFFFF, int(head), t])
        row_noise = sigma * rng.standard_normal(out.shape[1])
        if mask is None:
            out[t] += row_noise
        else:
            out[t] = np.where(mask[t], out[t] + row_noise, out[t])
    return out


@dataclass
class AttentionResult:
    context: np.ndarray  # (T, output_heads, d)
    masked_rows: np.ndarray  # (T,) True where every key was masked
    logits: np.ndarray = field(repr=False)  # (output_heads, T, S), -inf where masked

    @property
    def any_masked_rows(self) -> bool:
        return bool(self.masked_rows.any())


def _softmax_rows(logits: np.ndarray, mask: np.ndarray):
    masked = np.where(mask, logits, -np.inf)
    row_max = masked.max(axis=-1, keepdims=True)
    empty = ~mask.any(axis=-1)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.where(mask, np.exp(masked - row_max), 0.0)
    denom = e.sum(axis=-1, keepdims=True)
    probs = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    return probs, masked, empty


def attend(
    Q: np.ndarray,
    K: np.ndarray,
    V: np.ndarray,
    positions,
    layout: HeadLayout,
    params: RotaryParams,
    causal: bool = True,
    scale: Optional[float] = None,
    noise: Optional[NoiseSpec] = None,
    key_positions=None,
) -> AttentionResult:
    """Attention over projected, un-rotated heads.

    ``Q`` is ``(T, physical_q_heads, d)``; ``K`` and ``V`` are
    ``(S, kv_heads, d)``. ``positions`` gives query positions and, unless
    ``key_positions`` is passed, key positions too. Under ``causal`` a key is
    masked when its position exceeds the query position. A row with no
    visible key yields a zero context vector and is flagged.
    """
    Q = np.asarray(Q, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    V = np.asarray(V, dtype=np.float64)
    if Q.ndim != 3 or K.ndim != 3 or V.ndim != 3:
        raise ValueError("Q, K, V must be 3-D token-major arrays (seq, heads, d)")
    if Q.shape[0] == 0 or K.shape[0] == 0:
        raise ValueError("empty sequence")
    d = layout.head_dim
    if Q.shape[1:] != (layout.physical_q_heads, d):
        raise ValueError(f"Q shape {Q.shape} does not match layout {layout}")
    if K.shape[1:] != (layout.kv_heads, d) or V.shape != K.shape:
        raise ValueError(f"K/V shapes {K.shape}/{V.shape} do not match layout")
    if params.head_dim != d:
        raise ValueError(f"rotary head_dim {params.head_dim} != layout head_dim {d}")
    q_pos = np.asarray(positions, dtype=np.float64)
    k_pos = q_pos if key_positions is None else np.asarray(key_positions, dtype=np.float64)
    if q_pos.shape != (Q.shape[0],) or k_pos.shape != (K.shape[0],):
        raise ValueError("positions must be 1-D and match the sequence lengths")
    if scale is None:
        scale = 1.0 / math.sqrt(d)

    q_heads = expand_queries(Q, layout.variant)  # (T, O, d)
    q_rot = apply_absolute(q_heads, q_pos[:, None], params)
    k_rot = apply_absolute(K, k_pos[:, None], params)  # (S, G, d)
    kv_idx = layout.kv_index()
    logits = scale * np.einsum("tod,sod->ots", q_rot, k_rot[:, kv_idx, :])

    if causal:
        mask = k_pos[None, :] <= q_pos[:, None]
    else:
        mask = np.ones((Q.shape[0], K.shape[0]), dtype=bool)

    if noise is not None:
        for o in range(layout.output_heads):
            logits[o] = inject_noise(logits[o], noise, o, layout.is_imag_head(o), mask)

    probs, masked_logits, empty = _softmax_rows(logits, mask[None, :, :])
    context = np.einsum("ots,sod->tod", probs, V[:, kv_idx, :])
    return AttentionResult(context=context, masked_rows=empty[0], logits=masked_logits)


def project_output(head_contexts: np.ndarray, w_o: np.ndarray) -> np.ndarray:
    """Concatenate heads per token and apply ``w_o`` (no bias)."""
    head_contexts = np.asarray(head_contexts, dtype=np.float64)
    w_o = np.asarray(w_o, dtype=np.float64)
    flat = head_contexts.reshape(head_contexts.shape[0], -1)
    if flat.shape[1] != w_o.shape[0]:
        raise ValueError(
            f"concatenated head width {flat.shape[1]} != w_o input width {w_o.shape[0]}"
        )
    return flat @ w_o


@dataclass
class LayerOutput:
    output: np.ndarray  # (T, hidden)
    attention: AttentionResult


def attention_layer(
    x: np.ndarray,
    weights: ProjectionSet,
    positions,
    layout: HeadLayout,
    params: RotaryParams,
    causal: bool = True,
    scale: Optional[float] = None,
    noise: Optional[NoiseSpec] = None,
) -> LayerOutput:
    """Project ``x`` (T, hidden), attend, and apply the output projection."""
    x = np.asarray(x, dtype=np.float64)
    weights.check(layout)
    T, d = x.shape[0], layout.head_dim
    Q = (x @ weights.w_q).reshape(T, layout.physical_q_heads, d)
    K = (x @ weights.w_k).reshape(T, layout.kv_heads, d)
    V = (x @ weights.w_v).reshape(T, layout.kv_heads, d)
    res = attend(Q, K, V, positions, layout, params, causal=causal, scale=scale, noise=noise)
    return LayerOutput(project_output(res.context, weights.w_o), res)
