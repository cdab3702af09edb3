"""Rotary position embeddings with real and imaginary attention scores."""

from .rotary import (
    RotaryParams,
    ScorePair,
    apply_absolute,
    build_thetas,
    rotate_quarter_neg,
    rotate_quarter_pos,
    score_absolute,
    score_complex_oracle,
    score_imag_relative,
    score_real_relative,
)
from .attention import (
    HeadLayout,
    NoiseSpec,
    ProjectionSet,
    attend,
    attention_layer,
    build_layout,
    expand_queries,
    generate_weights,
    inject_noise,
    project_output,
)
from .scaling import ScalingSpec, linear_pi, ntk_rebase

__version__ = "0.1.0"
