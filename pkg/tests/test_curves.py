import csv
import io
import math

import numpy as np
import pytest

from ropepp.analysis.curves import (
    CURVE_KINDS,
    CURVES_SCHEMA,
    char_curve,
    char_curve_imag,
    char_curve_real,
    curve_samples,
    integral_curve,
    log_grid,
    write_curves_csv,
)
from ropepp.rotary import build_thetas

from oracles import char_integral_quadrature

# Gauss-Legendre quadrature of the normalized integrand at dt = 1000.
REAL_INTEGRAL_1E3 = 0.18769064251177905
IMAG_INTEGRAL_1E3 = 0.15963456305415857


@pytest.mark.parametrize("d", [2, 8, 128, 4096])
def test_origin_values_exact(d):
    assert char_curve_real(d, 0) == 1.0
    assert char_curve_imag(d, 0) == 0.0


def test_d2_is_single_term():
    dt = np.array([0.0, 0.5, 3.0, 77.0, 9999.0])
    np.testing.assert_array_equal(char_curve_real(2, dt), np.cos(dt))
    np.testing.assert_array_equal(char_curve_imag(2, dt), np.sin(dt))


def test_negative_offset_rejected():
    with pytest.raises(ValueError):
        char_curve_real(8, -1.0)
    with pytest.raises(ValueError):
        char_curve(build_thetas(8), 1.0, "both")


@pytest.mark.parametrize("d", [0, 3])
def test_bad_dimension(d):
    with pytest.raises(ValueError):
        char_curve_real(d, 1.0)


def test_integral_values_against_quadrature():
    assert char_integral_quadrature("real", 1e3) == pytest.approx(REAL_INTEGRAL_1E3, abs=1e-13)
    assert char_integral_quadrature("imag", 1e3) == pytest.approx(IMAG_INTEGRAL_1E3, abs=1e-13)
    assert integral_curve("real", 1e3) == pytest.approx(REAL_INTEGRAL_1E3, abs=1e-10)
    assert integral_curve("imag", 1e3) == pytest.approx(IMAG_INTEGRAL_1E3, abs=1e-10)


@pytest.mark.parametrize("dt", [0.3, 1.0, 17.0, 250.0, 5000.0, 1e4])
@pytest.mark.parametrize("kind", ["real", "imag"])
def test_integral_matches_quadrature(kind, dt):
    assert abs(integral_curve(kind, dt) - char_integral_quadrature(kind, dt)) <= 1e-8


def test_imag_integral_limits():
    assert integral_curve("imag", 0.0) == 0.0
    assert abs(integral_curve("imag", 1e-9)) < 1e-9
    with pytest.raises(ValueError):
        integral_curve("real", 0.0)


def test_real_exceeds_imag_before_crossover():
    # The integral forms cross near dt ~ 1.2e3; before it real > imag,
    # from there on the imaginary curve dominates.
    assert integral_curve("real", 1e3) > integral_curve("imag", 1e3)
    for dt in (2e3, 5e3, 1e4):
        assert integral_curve("imag", dt) > integral_curve("real", dt)


def test_imag_integral_positive():
    dt = np.logspace(-6, 4, 200)
    assert np.all(integral_curve("imag", dt) > 0)


@pytest.mark.parametrize("d", [64, 128, 4096])
def test_real_curve_below_origin(d):
    dt = np.arange(1, 10001, dtype=float)
    assert np.all(char_curve_real(d, dt) < 1.0)


def test_d4096_examples():
    assert abs(char_curve_real(4096, 100) - integral_curve("real", 100)) <= 0.02
    assert abs(char_curve_imag(4096, 1000) - integral_curve("imag", 1000)) <= 0.02


def _max_gap(d, grid):
    return max(
        np.abs(char_curve_real(d, grid) - integral_curve("real", grid)).max(),
        np.abs(char_curve_imag(d, grid) - integral_curve("imag", grid)).max(),
    )


def test_d4096_within_tolerance_on_log_grid():
    grid = log_grid(1e4, include_zero=False)
    assert grid[0] == 1.0 and grid[-1] == pytest.approx(1e4)
    assert _max_gap(4096, grid) <= 0.02


def test_convergence_as_d_doubles():
    grid = log_grid(1e4, include_zero=False)
    gaps = [_max_gap(d, grid) for d in (64, 128, 256, 512, 1024, 2048, 4096)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_log_grid_shape():
    g = log_grid(1e3, points_per_decade=4)
    assert g[0] == 0.0 and g[1] == 1.0
    assert len(g) == 1 + 13
    assert np.all(np.diff(g) > 0)
    np.testing.assert_array_equal(log_grid(1), [0.0, 1.0])
    with pytest.raises(ValueError):
        log_grid(0.5)


def test_curve_samples_and_csv():
    grid = log_grid(100, points_per_decade=2)
    samples = curve_samples(16, grid)
    kinds = {s.kind for s in samples}
    assert kinds == set(CURVE_KINDS)
    # the real integral skips dt = 0
    assert sum(s.kind == "real_integral" for s in samples) == len(grid) - 1
    assert sum(s.kind == "imag_integral" for s in samples) == len(grid)

    text = write_curves_csv(samples)
    lines = text.splitlines()
    assert lines[0] == f"# schema: {CURVES_SCHEMA}"
    assert lines[1] == "delta_t,kind,value"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == len(samples)
    for row, s in zip(rows, samples):
        assert float(row["value"]) == s.value and float(row["delta_t"]) == s.delta_t

    buf = io.StringIO()
    write_curves_csv(samples, buf)
    assert buf.getvalue() == text


def test_curve_samples_rejects_unknown_kind():
    with pytest.raises(ValueError):
        curve_samples(8, [1.0], kinds=["real"])


def test_custom_base_overload():
    p = build_thetas(32, 500000)
    ang = 123.0 * p.thetas
    assert char_curve(p, 123.0, "real") == pytest.approx(float(np.mean(np.cos(ang))), abs=1e-15)
    assert char_curve_real(32, 123.0, base=500000) == char_curve(p, 123.0, "real")
    assert integral_curve("imag", 10.0, base=100.0) == pytest.approx(
        char_integral_quadrature("imag", 10.0, base=100.0), abs=1e-10
    )
    assert math.isfinite(integral_curve("real", 10.0, base=100.0))
