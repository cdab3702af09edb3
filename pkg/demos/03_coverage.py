"""
Which multiplier values training covers
=======================================

For a slow frequency the training window only sweeps a small arc. Under RoPE
the q_even*k_odd product then only sees sin, which is non-negative there;
RoPE++ adds -cos from the imaginary channel, so negative values show up too.
"""

import math

from ropepp import build_thetas
from ropepp.analysis import coverage_map, full_range_onset

params = build_thetas(128, 10000)
L = 4096
rope = coverage_map(params, L, "rope")
pp = coverage_map(params, L, "ropepp")

for n in (10, 40, 55, 63):
    a, b = rope.entry(n, "q_even*k_odd"), pp.entry(n, "q_even*k_odd")
    print(f"n={n:2d} angle span {a.theta * (L - 1):8.3f}  "
          f"rope [{a.lo:+.3f}, {a.hi:+.3f}]  ropepp [{b.lo:+.3f}, {b.hi:+.3f}]")

###############################################################################
# How long a window is needed before +-1 is reached for both the cosine and
# the sine multipliers? RoPE++ gets there at half the length.

theta = 0.01
print(full_range_onset(theta, "rope", 4096), full_range_onset(theta, "ropepp", 4096),
      round(math.pi / theta))
