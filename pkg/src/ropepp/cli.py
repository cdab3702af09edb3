"""``ropepp`` command line: verify, curves, coverage, attend, budget, bench.

Data goes to ``--out`` (or stdout): CSV for curves and coverage, JSON for
everything else. Every output names its schema. Exit codes: 0 success,
1 verification failure, 2 usage error. ``ROPEPP_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from contextlib import nullcontext
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .accounting import (
    MODEL_PRESETS,
    BUDGET_SCHEMA,
    ModelConfig,
    bench_attend,
    budget,
)
from .analysis.coverage import coverage_map, write_coverage_csv
from .analysis.curves import CURVE_KINDS, curve_samples, log_grid, write_curves_csv
from .attention import (
    NoiseSpec,
    attention_layer,
    build_layout,
    generate_weights,
    imag_output_rows,
)
from .config import ConfigError, load_config
from .rotary import build_thetas
from .scaling import ScalingSpec, apply_scaling
from .verify import DEFAULT_SIZES, equivalence_battery
from .weights_io import load_weights

ATTEND_SCHEMA = "ropepp.attend/1"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_MODEL_KEYS = (
    "model.name", "model.hidden", "model.intermediate", "model.layers",
    "model.attn_heads", "model.kv_heads", "model.vocab",
)
CONFIG_KEYS = _MODEL_KEYS + (
    "rotary.base",
    "scaling.kind", "scaling.new_base", "scaling.factor",
    "attend.variant", "attend.seq", "attend.noise_real", "attend.noise_imag",
    "attend.weights", "run.seed",
)


class UsageError(Exception):
    pass


def _int_list(text: str):
    try:
        vals = [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _str_list(text: str):
    return [x for x in text.replace(" ", "").split(",") if x]


def bundled_config(name: str) -> Path:
    """Path to a shipped model config (``376m``, ``776m`` or ``1.5b``)."""
    ref = resources.files("ropepp.configs").joinpath(f"{name.lower()}.cfg")
    return Path(str(ref))


def model_from_config(values: dict) -> ModelConfig:
    try:
        return ModelConfig(
            name=values.get("model.name", "custom"),
            hidden=int(values["model.hidden"]),
            intermediate=int(values.get("model.intermediate", 4 * int(values["model.hidden"]))),
            layers=int(values["model.layers"]),
            attn_heads=int(values["model.attn_heads"]),
            kv_heads=int(values["model.kv_heads"]),
            vocab=int(values.get("model.vocab", 1)),
        )
    except KeyError as exc:
        raise UsageError(f"config is missing {exc.args[0]}")


def _resolve_model(spec: str) -> ModelConfig:
    if spec in MODEL_PRESETS:
        return MODEL_PRESETS[spec]
    for key in MODEL_PRESETS:
        if spec.lower() == key.lower():
            return MODEL_PRESETS[key]
    path = Path(spec)
    if not path.exists():
        raise UsageError(f"unknown model {spec!r}; use {list(MODEL_PRESETS)} or a config path")
    return model_from_config(load_config(path, CONFIG_KEYS))


def _emit(args, text: str) -> None:
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _pick(flag, file_values: dict, key: str, cast, default):
    """Flags override file values, which override defaults."""
    if flag is not None:
        return flag
    if key in file_values:
        try:
            return cast(file_values[key])
        except ValueError:
            raise UsageError(f"bad value for {key}: {file_values[key]!r}")
    return default


def _require_f64(args):
    if args.float_mode != "64":
        raise UsageError("32-bit mode is only available for the bench command")


# -- commands ---------------------------------------------------------------


def cmd_verify(args, cfg: dict) -> int:
    _require_f64(args)
    seed = _pick(args.seed, cfg, "run.seed", int, 0)
    report = equivalence_battery(seed=seed, sizes=args.sizes, n_cases=args.cases)
    _emit(args, _json(report))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _expand_kinds(kinds):
    out = []
    for k in kinds:
        if k in ("real", "imag"):
            out += [f"{k}_discrete", f"{k}_integral"]
        elif k in CURVE_KINDS:
            out.append(k)
        else:
            raise UsageError(f"unknown curve kind {k!r}")
    return out


def cmd_curves(args, cfg: dict) -> int:
    _require_f64(args)
    base = _pick(args.base, cfg, "rotary.base", float, 10000.0)
    if args.max_dt < 1:
        raise UsageError("--max-dt must be >= 1")
    grid = log_grid(args.max_dt, args.points_per_decade)
    samples = curve_samples(args.d, grid, _expand_kinds(args.kinds), base)
    _emit(args, write_curves_csv(samples))
    return EXIT_OK


def cmd_coverage(args, cfg: dict) -> int:
    _require_f64(args)
    base = _pick(args.base, cfg, "rotary.base", float, 10000.0)
    if args.train_len < 2:
        raise UsageError("--train-len must be >= 2")
    variant = "rope" if args.variant == "rope" else "ropepp"
    report = coverage_map(build_thetas(args.d, base), args.train_len, variant)
    _emit(args, write_coverage_csv(report))
    return EXIT_OK


def _scaling_from(args, cfg: dict) -> ScalingSpec:
    kind = _pick(args.scaling_kind, cfg, "scaling.kind", str, "none")
    new_base = _pick(args.scaling_new_base, cfg, "scaling.new_base", float, None)
    factor = _pick(args.scaling_factor, cfg, "scaling.factor", float, None)
    return ScalingSpec(kind, new_base if kind == "ntk_rebase" else None,
                       factor if kind == "linear_pi" else None)


def _digest(arr: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(arr, dtype="<f8").tobytes()).hexdigest()


def attend_digest(out, layout, positions, include_tensors: bool = False) -> dict:
    """Summary of one forward pass; per-head logit norms and mean attended
    distance expose how local or global each head is."""
    att = out.attention
    finite = np.where(np.isfinite(att.logits), att.logits, 0.0)
    logits = att.logits
    with np.errstate(invalid="ignore"):
        m = np.where(np.isfinite(logits), logits, -np.inf)
        m = m - m.max(axis=-1, keepdims=True)
        p = np.where(np.isfinite(m), np.exp(m), 0.0)
        p = p / np.maximum(p.sum(axis=-1, keepdims=True), 1e-300)
    pos = np.asarray(positions, dtype=np.float64)
    dist = pos[:, None] - pos[None, :]
    mean_dist = (p * dist[None]).sum(axis=-1).mean(axis=-1)
    heads = []
    for o in range(layout.output_heads):
        heads.append({
            "head": o,
            "channel": "imag" if layout.is_imag_head(o) else "real",
            "logit_norm": float(np.linalg.norm(finite[o])),
            "mean_attended_distance": float(mean_dist[o]),
        })
    rep = {
        "schema": ATTEND_SCHEMA,
        "variant": layout.variant,
        "seq": int(out.output.shape[0]),
        "output_shape": list(out.output.shape),
        "output_sum": float(out.output.sum()),
        "output_l2": float(np.linalg.norm(out.output)),
        "output_sha256": _digest(out.output),
        "masked_rows": int(att.masked_rows.sum()),
        "heads": heads,
    }
    if include_tensors:
        rep["output"] = out.output.tolist()
        rep["context"] = att.context.tolist()
    return rep


def cmd_attend(args, cfg: dict) -> int:
    _require_f64(args)
    seed = _pick(args.seed, cfg, "run.seed", int, 0)
    variant = _pick(args.variant, cfg, "attend.variant", str, "rope")
    seq = _pick(args.seq, cfg, "attend.seq", int, 16)
    sigma_r = _pick(args.noise_real, cfg, "attend.noise_real", float, 0.0)
    sigma_i = _pick(args.noise_imag, cfg, "attend.noise_imag", float, 0.0)
    weights_path = _pick(args.weights, cfg, "attend.weights", str, None)
    base = _pick(args.base, cfg, "rotary.base", float, 10000.0)
    if seq < 1:
        raise UsageError("--seq must be >= 1")

    if weights_path is not None:
        try:
            weights, layout = load_weights(weights_path)
        except FileNotFoundError as exc:
            raise UsageError(str(exc))
        if args.variant is not None and layout.variant != variant.lower():
            raise UsageError(f"weights file holds a {layout.variant} layout, not {variant}")
        hidden = weights.hidden
    else:
        if any(k.startswith("model.") for k in cfg):
            model = model_from_config(cfg)
            hidden, heads, kv, d = model.hidden, model.attn_heads, model.kv_heads, model.head_dim
        else:
            hidden, heads, kv, d = args.hidden, args.heads, args.kv_heads, args.d
        if args.d is not None and args.d != d and any(k.startswith("model.") for k in cfg):
            raise UsageError("--d conflicts with the model config head size")
        if d is None:
            d = hidden // heads
        layout = build_layout(variant, heads, kv, d)
        weights = generate_weights(layout, hidden, seed)

    if args.zero_imag_wo:
        if not layout.imaginary:
            raise UsageError("--zero-imag-wo needs the eh or ec layout")
        weights.w_o = np.where(imag_output_rows(layout)[:, None], 0.0, weights.w_o)

    params = build_thetas(layout.head_dim, base)
    positions = np.arange(seq, dtype=np.float64) + args.position_offset
    params, positions = apply_scaling(_scaling_from(args, cfg), params, positions)
    noise = None
    if sigma_r or sigma_i:
        noise = NoiseSpec(sigma_r, sigma_i, seed)
    x = np.random.default_rng([int(seed), 1]).standard_normal((seq, hidden))
    out = attention_layer(x, weights, positions, layout, params, noise=noise)
    rep = attend_digest(out, layout, positions, args.full)
    rep["noise"] = {"sigma_real": sigma_r, "sigma_imag": sigma_i}
    rep["seed"] = int(seed)
    _emit(args, _json(rep))
    return EXIT_OK


def _models(args, cfg: dict):
    if args.model:
        return [_resolve_model(m) for m in args.model]
    if any(k.startswith("model.") for k in cfg):
        return [model_from_config(cfg)]
    return list(MODEL_PRESETS.values())


def cmd_budget(args, cfg: dict) -> int:
    _require_f64(args)
    reports = []
    for model in _models(args, cfg):
        ref = budget(model, "rope", args.dtype_bytes)
        for variant in args.variants:
            b = budget(model, variant, args.dtype_bytes)
            rows = []
            for seq in args.seqs:
                fl = b.score_flops(seq)
                rf = ref.score_flops(seq)
                rows.append({
                    "seq": seq,
                    "kv_bytes": b.kv_bytes(seq),
                    "kv_ratio_vs_rope": b.kv_bytes(seq) / ref.kv_bytes(seq),
                    "flops": fl.total,
                    "logit_flops": fl.logits,
                    "logit_flop_ratio_vs_rope": fl.logits / rf.logits,
                })
            entry = b.to_dict()
            entry["rows"] = rows
            reports.append(entry)
    _emit(args, _json({
        "schema": BUDGET_SCHEMA,
        "scope": "attention block only",
        "flops_unit": "multiply-adds per decoded token",
        "reports": reports,
    }))
    return EXIT_OK


def cmd_bench(args, cfg: dict) -> int:
    seed = _pick(args.seed, cfg, "run.seed", int, 0)
    bits = 32 if args.float_mode == "32" else 64
    reports = []
    for model in _models(args, cfg):
        for variant in args.variants:
            rep = bench_attend(model, variant, sorted(args.seqs), args.repeats, seed,
                               args.dtype_bytes, compute_bits=bits)
            reports.append(rep.to_dict())
    _emit(args, _json({"schema": "ropepp.bench/1", "reports": reports}))
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--config", default=None, help="key = value config file")
    common.add_argument("--float-mode", choices=("64", "32"), default="64")

    p = argparse.ArgumentParser(prog="ropepp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="score-form agreement battery")
    v.add_argument("--sizes", type=_int_list, default=list(DEFAULT_SIZES))
    v.add_argument("--cases", type=int, default=2000)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("curves", parents=[common], help="characteristic curves as CSV")
    c.add_argument("--d", type=int, default=128)
    c.add_argument("--base", type=float, default=None)
    c.add_argument("--max-dt", type=float, default=10000.0)
    c.add_argument("--points-per-decade", type=int, default=10)
    c.add_argument("--kinds", type=_str_list, default=list(CURVE_KINDS))
    c.set_defaults(func=cmd_curves)

    g = sub.add_parser("coverage", parents=[common], help="positional coverage as CSV")
    g.add_argument("--d", type=int, default=128)
    g.add_argument("--base", type=float, default=None)
    g.add_argument("--train-len", type=int, default=4096)
    g.add_argument("--variant", choices=("rope", "ropepp", "eh", "ec"), default="ropepp")
    g.set_defaults(func=cmd_coverage)

    a = sub.add_parser("attend", parents=[common], help="one attention forward pass")
    a.add_argument("--variant", choices=("rope", "eh", "ec"), default=None)
    a.add_argument("--seq", type=int, default=None)
    a.add_argument("--weights", default=None, help="weights blob with .json sidecar")
    a.add_argument("--hidden", type=int, default=64)
    a.add_argument("--heads", type=int, default=4)
    a.add_argument("--kv-heads", type=int, default=2)
    a.add_argument("--d", type=int, default=None)
    a.add_argument("--base", type=float, default=None)
    a.add_argument("--noise-real", type=float, default=None)
    a.add_argument("--noise-imag", type=float, default=None)
    a.add_argument("--position-offset", type=int, default=0)
    a.add_argument("--scaling-kind", choices=("none", "ntk_rebase", "linear_pi"), default=None)
    a.add_argument("--scaling-new-base", type=float, default=None)
    a.add_argument("--scaling-factor", type=float, default=None)
    a.add_argument("--zero-imag-wo", action="store_true")
    a.add_argument("--full", action="store_true", help="include full tensors")
    a.set_defaults(func=cmd_attend)

    for name, func, helptext in (
        ("budget", cmd_budget, "closed-form cache/parameter/flop accounting"),
        ("bench", cmd_bench, "decode micro-benchmark"),
    ):
        b = sub.add_parser(name, parents=[common], help=helptext)
        b.add_argument("--model", action="append", default=None,
                       help="376M, 776M, 1.5B or a config path (repeatable)")
        b.add_argument("--variants", type=_str_list, default=["rope", "eh", "ec"])
        b.add_argument("--seqs", type=_int_list,
                       default=[1, 2048, 4096] if name == "budget" else [256, 1024])
        b.add_argument("--dtype-bytes", type=int, default=2)
        if name == "bench":
            b.add_argument("--repeats", type=int, default=5)
        b.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    threads = os.environ.get("ROPEPP_THREADS")
    try:
        limit = threadpool_limits(limits=int(threads)) if threads else nullcontext()
    except ValueError:
        print(f"ropepp: ROPEPP_THREADS must be an integer, got {threads!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config, CONFIG_KEYS) if args.config else {}
        with limit:
            return args.func(args, cfg)
    except (UsageError, ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"ropepp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
