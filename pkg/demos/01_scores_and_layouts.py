"""
Real and imaginary attention scores
===================================

A rotary score is the real part of a complex product between a rotated query
and a rotated key. The imaginary attention keeps the other half: the negative
imaginary part, which is the same as rotating the query by -pi/2 first.
"""

import numpy as np

from ropepp import build_thetas, rotate_quarter_neg, score_absolute
from ropepp.rotary import score_complex_oracle, score_imag_relative, score_real_relative

rng = np.random.default_rng(0)
params = build_thetas(64, 10000)
q, k = rng.standard_normal((2, 64))

# Both scores only depend on t - s.
for t, s in [(10, 3), (1010, 1003), (250_007, 250_000)]:
    print(t, s, score_absolute(q, k, t, s, params, "real"), score_absolute(q, k, t, s, params, "imag"))

# The relative forms and the complex oracle agree with the absolute one.
print(score_real_relative(q, k, 7, params), score_imag_relative(q, k, 7, params))
print(score_complex_oracle(q, k, 10, 3, params))

# Imaginary attention is real attention with a pre-rotated query.
print(np.isclose(score_absolute(rotate_quarter_neg(q), k, 10, 3, params, "real"),
                 score_absolute(q, k, 10, 3, params, "imag")))

###############################################################################
# Head layouts
# ------------
# EH keeps the output head count and halves query and KV heads; EC keeps the
# KV heads and doubles the output heads.

from ropepp import build_layout, generate_weights, attention_layer

for variant in ("rope", "eh", "ec"):
    lay = build_layout(variant, 8, 4, 16)
    print(variant, lay.physical_q_heads, lay.output_heads, lay.kv_heads)

lay = build_layout("ec", 4, 2, 16)
w = generate_weights(lay, 64, seed=1)
x = rng.standard_normal((12, 64))
out = attention_layer(x, w, np.arange(12), lay, build_thetas(16))
print(out.output.shape, out.attention.context.shape)
