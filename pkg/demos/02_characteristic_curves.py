"""
Characteristic curves
=====================

Averaging cos and sin of theta_n * dt over the frequency schedule gives two
curves. With many frequencies they approach Ci and Si differences divided by
ln(10000). The cosine curve drops quickly, the sine curve stays high.
"""

import numpy as np

from ropepp.analysis import (
    char_curve_imag,
    char_curve_real,
    integral_curve,
    log_grid,
    sine_integral,
)

grid = log_grid(1e4, points_per_decade=2, include_zero=False)
print("dt        real(d=128)  imag(d=128)  real int   imag int")
for dt in grid:
    print(f"{dt:8.1f}  {char_curve_real(128, dt):10.4f}  {char_curve_imag(128, dt):10.4f}"
          f"  {integral_curve('real', dt):9.4f}  {integral_curve('imag', dt):9.4f}")

# More frequencies, closer to the integral form.
fine = log_grid(1e4, include_zero=False)
for d in (64, 256, 1024, 4096):
    gap = np.abs(char_curve_imag(d, fine) - integral_curve("imag", fine)).max()
    print(d, round(float(gap), 4))

print(sine_integral(1e5), np.pi / 2)
