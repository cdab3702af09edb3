"""Characteristic curves, expectation identities and coverage analysis."""

from .coverage import (
    COVERAGE_SCHEMA,
    TERMS,
    CoverageEntry,
    CoverageReport,
    FrequencySummary,
    coverage_map,
    full_range_onset,
    write_coverage_csv,
)
from .curves import (
    CURVE_KINDS,
    CURVES_SCHEMA,
    CurveSample,
    char_curve,
    char_curve_imag,
    char_curve_real,
    curve_samples,
    integral_curve,
    log_grid,
    write_curves_csv,
)
from .expectation import ExpectationCheck, mc_aggregation_check, mc_mean_score_check
from .special import cosine_integral, sici, sine_integral
