from fractions import Fraction

import pytest

from ropepp.accounting import (
    MODEL_PRESETS,
    BENCH_SCHEMA,
    ModelConfig,
    bench_attend,
    budget,
    kv_cache_bytes,
    projection_params,
    score_flops,
)

from oracles import symbolic_attention_macs

CONFIGS = list(MODEL_PRESETS.values())

# 2 * 12 layers * 6 kv heads * 128 dims * 2 bytes
KV_776M_ROPE = 36864
# Hand count of the 776M decode step at seq 4096, EH over RoPE.
EH_ROPE_TOTAL_776M_4096 = Fraction(22, 25)


def test_presets_shapes():
    c = MODEL_PRESETS["376M"]
    assert (c.hidden, c.intermediate, c.layers, c.attn_heads, c.kv_heads) == (1024, 3584, 8, 8, 4)
    assert c.head_dim == 128
    c = MODEL_PRESETS["776M"]
    assert (c.hidden, c.layers, c.attn_heads, c.kv_heads, c.head_dim) == (1536, 12, 12, 6, 128)
    c = MODEL_PRESETS["1.5B"]
    assert (c.hidden, c.layers, c.attn_heads, c.kv_heads, c.head_dim) == (2048, 16, 16, 4, 128)
    assert all(c.vocab == 128256 for c in CONFIGS)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig("x", 1000, 1, 1, 3, 1, 1)
    with pytest.raises(ValueError):
        ModelConfig("x", 1024, 1, 1, 8, 3, 1)
    with pytest.raises(ValueError):
        ModelConfig("x", 1024, 1, 0, 8, 4, 1)


def test_kv_776m():
    c = MODEL_PRESETS["776M"]
    assert kv_cache_bytes(c, "rope") == KV_776M_ROPE
    assert kv_cache_bytes(c, "eh") == KV_776M_ROPE // 2
    assert kv_cache_bytes(c, "ec") == KV_776M_ROPE
    assert kv_cache_bytes(c, "rope", dtype_bytes=4) == 2 * KV_776M_ROPE
    with pytest.raises(ValueError):
        kv_cache_bytes(c, "rope", dtype_bytes=0)


def test_wq_376m():
    assert projection_params(MODEL_PRESETS["376M"], "rope")["wq"] == 1024 * 1024


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.name)
def test_ratios(cfg):
    r, eh, ec = (budget(cfg, v) for v in ("rope", "eh", "ec"))
    assert 2 * eh.kv_bytes_per_token == r.kv_bytes_per_token
    assert ec.kv_bytes_per_token == r.kv_bytes_per_token
    assert ec.params_wo == 2 * r.params_wo
    assert eh.params_wo == r.params_wo
    assert 2 * eh.params_qkv == r.params_qkv
    assert 2 * eh.params_wq == r.params_wq
    assert ec.params_qkv == r.params_qkv
    assert eh.params_attention < r.params_attention < ec.params_attention


@pytest.mark.parametrize("cfg", CONFIGS, ids=lambda c: c.name)
@pytest.mark.parametrize("variant", ["rope", "eh", "ec"])
@pytest.mark.parametrize("seq", [1, 17, 4096])
def test_flops_match_symbolic_count(cfg, variant, seq):
    ref = symbolic_attention_macs(cfg.hidden, cfg.layers, cfg.attn_heads, cfg.kv_heads,
                                  cfg.head_dim, seq, variant)
    assert score_flops(cfg, variant, seq).total == ref


def test_flop_examples():
    c = MODEL_PRESETS["776M"]
    one = score_flops(c, "rope", 1)
    assert one.logits == c.layers * c.attn_heads * c.head_dim
    assert one.attention == 2 * one.logits
    ec, r = score_flops(c, "ec", 4096), score_flops(c, "rope", 4096)
    assert Fraction(ec.logits, r.logits) == 2
    eh = score_flops(c, "eh", 4096)
    assert Fraction(eh.total, r.total) == EH_ROPE_TOTAL_776M_4096
    assert eh.kv_proj * 2 == r.kv_proj
    with pytest.raises(ValueError):
        score_flops(c, "rope", 0)


def test_budget_record():
    b = budget(MODEL_PRESETS["376M"], "RoPE++_EH")
    assert b.variant == "eh"
    d = b.to_dict()
    assert d["params_attention"] == b.params_attention
    assert "_model" not in d
    assert b.kv_bytes(10) == 10 * b.kv_bytes_per_token
    assert b.score_flops(8) == score_flops(MODEL_PRESETS["376M"], "eh", 8)


SMALL = ModelConfig("tiny", 64, 128, 2, 4, 2, 100)


@pytest.mark.parametrize("variant", ["rope", "eh", "ec"])
@pytest.mark.parametrize("dtype_bytes", [2, 4])
def test_bench_bytes_exact(variant, dtype_bytes):
    rep = bench_attend(SMALL, variant, [1, 5, 32], repeats=1, dtype_bytes=dtype_bytes)
    for row in rep.rows:
        assert row.kv_bytes == kv_cache_bytes(SMALL, variant, dtype_bytes) * row.seq
        assert row.flops == score_flops(SMALL, variant, row.seq).total
        assert row.tpot_us > 0
    assert rep.metadata["threads"] == 1


def test_bench_eh_half_bytes():
    r = bench_attend(SMALL, "rope", [3, 9], repeats=1)
    h = bench_attend(SMALL, "eh", [3, 9], repeats=1)
    assert [2 * a.kv_bytes for a in h.rows] == [b.kv_bytes for b in r.rows]


def test_bench_report_schema():
    d = bench_attend(SMALL, "ec", [2], repeats=2, seed=4).to_dict()
    assert d["schema"] == BENCH_SCHEMA and d["config"] == "tiny" and d["variant"] == "ec"
    assert set(d["rows"][0]) == {"seq", "tpot_us", "kv_bytes", "flops"}


@pytest.mark.parametrize("seqs", [[], [4, 2], [0]])
def test_bench_rejects_bad_lengths(seqs):
    with pytest.raises(ValueError):
        bench_attend(SMALL, "rope", seqs)
