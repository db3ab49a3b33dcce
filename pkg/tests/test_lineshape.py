"""Lineshape evaluation and width measurement."""

import math

import numpy as np
import pytest
from scipy.special import voigt_profile

from beatnote import (
    HALF_POWER_DB,
    DensityTrace,
    FrequencyGrid,
    LineshapeParams,
    eval_gaussian,
    eval_lorentzian,
    eval_voigt_numeric,
    voigt_fwhm_approx,
    voigt_grid,
    voigt_width_numeric,
    width_at_level,
)
from beatnote.errors import (
    AmbiguousPeakError,
    InvalidParameterError,
    ResolutionError,
    WidthUndefinedError,
)

GAUSS_20DB = math.sqrt(math.log2(100.0))     # 2.577568
LORENTZ_20DB = math.sqrt(99.0)               # 9.949874


def gaussian_trace(fwhm=100.0, f0=0.0, step=None, half_span=None):
    step = step or fwhm / 50.0
    half_span = half_span or 12.0 * fwhm
    n = int(half_span / step)
    return eval_gaussian(FrequencyGrid(f0 - n * step, step, 2 * n + 1), f0, fwhm)


def lorentzian_trace(fwhm=100.0, f0=0.0, step=None, half_span=None):
    step = step or fwhm / 50.0
    half_span = half_span or 20.0 * fwhm
    n = int(half_span / step)
    return eval_lorentzian(FrequencyGrid(f0 - n * step, step, 2 * n + 1), f0, fwhm)


class TestFrequencyGrid:
    def test_points_exactly_reproducible(self):
        grid = FrequencyGrid(7e6 - 1e3, 0.25, 8001)
        pts = grid.points()
        idx = np.arange(8001)
        assert np.array_equal(pts, grid.start + idx * grid.step)
        assert grid.stop == pts[-1]

    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            FrequencyGrid(0.0, 0.0, 10)
        with pytest.raises(InvalidParameterError):
            FrequencyGrid(0.0, 1.0, 1)

    def test_index_of(self):
        grid = FrequencyGrid(100.0, 2.0, 51)
        assert grid.index_of(100.0) == 0
        assert grid.index_of(150.9) == 25


class TestGaussian:
    def test_peak_value(self):
        # Direct evaluation: 2 sqrt(ln 2) / (sqrt(pi) * 100)
        trace = gaussian_trace(100.0)
        expected = 2.0 * math.sqrt(math.log(2.0)) / (math.sqrt(math.pi) * 100.0)
        assert trace.values.max() == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(9.3944e-3, rel=1e-4)

    def test_half_maximum_at_half_fwhm(self):
        fwhm = 100.0
        grid = FrequencyGrid(-fwhm, fwhm / 2.0, 5)
        trace = eval_gaussian(grid, 0.0, fwhm)
        peak = trace.values[2]
        assert trace.values[1] == pytest.approx(peak / 2.0, rel=1e-12)
        assert trace.values[3] == pytest.approx(peak / 2.0, rel=1e-12)

    def test_unit_integral(self):
        trace = gaussian_trace(100.0, half_span=1000.0)
        assert abs(trace.integral() - 1.0) < 1e-6

    def test_rejects_bad_fwhm(self):
        grid = FrequencyGrid(-1.0, 0.1, 21)
        with pytest.raises(InvalidParameterError):
            eval_gaussian(grid, 0.0, 0.0)
        with pytest.raises(InvalidParameterError):
            eval_gaussian(grid, 0.0, -1.0)


class TestLorentzian:
    def test_peak_value(self):
        trace = lorentzian_trace(320.0)
        expected = 2.0 / (math.pi * 320.0)
        assert trace.values.max() == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(1.9894e-3, rel=1e-4)

    def test_half_maximum_at_half_fwhm(self):
        fwhm = 320.0
        grid = FrequencyGrid(-fwhm, fwhm / 2.0, 5)
        trace = eval_lorentzian(grid, 0.0, fwhm)
        assert trace.values[1] == pytest.approx(trace.values[2] / 2.0, rel=1e-12)

    def test_20db_width_factor(self):
        # Analytic inversion at 0.01x peak: full width sqrt(99) * fwhm
        trace = lorentzian_trace(320.0)
        w20 = width_at_level(trace, 20.0)
        assert w20 == pytest.approx(LORENTZ_20DB * 320.0, rel=5e-3)

    def test_heavy_tail_normalization(self):
        trace = lorentzian_trace(1.0, step=0.1, half_span=1e4)
        assert abs(trace.integral() - 1.0) < 1e-2

    def test_rejects_bad_fwhm(self):
        grid = FrequencyGrid(-1.0, 0.1, 21)
        with pytest.raises(InvalidParameterError):
            eval_lorentzian(grid, 0.0, -3.0)


class TestVoigtApprox:
    def test_pure_gaussian_limit_exact(self):
        assert voigt_fwhm_approx(0.0, 123.0) == 123.0

    def test_pure_lorentzian_value(self):
        assert voigt_fwhm_approx(320.0, 0.0) == pytest.approx(320.0215, abs=5e-3)

    def test_equal_widths_value(self):
        assert voigt_fwhm_approx(100.0, 100.0) == pytest.approx(163.7623, abs=5e-3)

    def test_rejects_negative(self):
        with pytest.raises(InvalidParameterError):
            voigt_fwhm_approx(-1.0, 1.0)
        with pytest.raises(InvalidParameterError):
            voigt_fwhm_approx(1.0, -1.0)

    def test_monotone_in_each_argument(self):
        widths = np.logspace(0, 4, 9)
        for other in (1.0, 100.0, 1e4):
            lor = [voigt_fwhm_approx(w, other) for w in widths]
            gau = [voigt_fwhm_approx(other, w) for w in widths]
            assert np.all(np.diff(lor) > 0)
            assert np.all(np.diff(gau) > 0)


class TestVoigtNumeric:
    def test_gaussian_delta_limit_equals_lorentzian(self):
        grid = FrequencyGrid(-2000.0, 1.0, 4001)
        params = LineshapeParams(0.0, fwhm_gaussian=1e-4, fwhm_lorentzian=100.0)
        trace = eval_voigt_numeric(grid, params)
        assert np.array_equal(trace.values, eval_lorentzian(grid, 0.0, 100.0).values)

    def test_lorentzian_delta_limit_equals_gaussian(self):
        grid = FrequencyGrid(-2000.0, 1.0, 4001)
        params = LineshapeParams(0.0, fwhm_gaussian=100.0, fwhm_lorentzian=1e-4)
        trace = eval_voigt_numeric(grid, params)
        assert np.array_equal(trace.values, eval_gaussian(grid, 0.0, 100.0).values)

    def test_equal_widths_match_closed_form(self):
        # Brute-force convolution vs the closed-form width: ~163.8 Hz
        fwhm = voigt_width_numeric(100.0, 100.0, HALF_POWER_DB)
        assert fwhm == pytest.approx(voigt_fwhm_approx(100.0, 100.0), rel=1e-2)
        assert fwhm == pytest.approx(163.8, rel=1e-2)

    def test_profile_matches_faddeeva_oracle(self):
        # Independent oracle: scipy's Faddeeva-function Voigt, renormalized
        # to the same finite span as the discrete convolution.
        params = LineshapeParams(0.0, fwhm_gaussian=100.0, fwhm_lorentzian=100.0)
        grid = voigt_grid(params)
        trace = eval_voigt_numeric(grid, params)
        sigma = 100.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        oracle = voigt_profile(grid.points(), sigma, 50.0)
        oracle /= np.trapezoid(oracle, dx=grid.step)
        assert np.max(np.abs(trace.values - oracle)) / oracle.max() < 2e-3

    def test_unit_integral(self):
        params = LineshapeParams(0.0, fwhm_gaussian=50.0, fwhm_lorentzian=200.0)
        trace = eval_voigt_numeric(voigt_grid(params), params)
        assert trace.integral() == pytest.approx(1.0, abs=1e-9)

    def test_fwhm_converged_under_refinement(self):
        coarse = voigt_width_numeric(100.0, 100.0, HALF_POWER_DB, points_per_width=40)
        fine = voigt_width_numeric(100.0, 100.0, HALF_POWER_DB, points_per_width=80)
        assert abs(coarse / fine - 1.0) < 1e-3

    def test_coarse_grid_rejected(self):
        grid = FrequencyGrid(-4000.0, 10.0, 801)
        params = LineshapeParams(0.0, fwhm_gaussian=100.0, fwhm_lorentzian=100.0)
        with pytest.raises(ResolutionError):
            eval_voigt_numeric(grid, params)

    def test_narrow_span_rejected(self):
        grid = FrequencyGrid(-500.0, 1.0, 1001)
        params = LineshapeParams(0.0, fwhm_gaussian=100.0, fwhm_lorentzian=100.0)
        with pytest.raises(ResolutionError):
            eval_voigt_numeric(grid, params)

    def test_both_degenerate_rejected(self):
        with pytest.raises(InvalidParameterError):
            LineshapeParams(0.0, 0.0, 0.0)

    @pytest.mark.parametrize("fl,fg", [(1.0, 1.0), (10.0, 1000.0), (1000.0, 10.0)])
    def test_symmetry(self, fl, fg):
        params = LineshapeParams(0.0, fwhm_gaussian=fg, fwhm_lorentzian=fl)
        trace = eval_voigt_numeric(voigt_grid(params), params)
        assert np.allclose(trace.values, trace.values[::-1], rtol=1e-9, atol=0)


class TestWidthAtLevel:
    def test_half_power_roundtrip_lorentzian(self):
        trace = lorentzian_trace(100.0, step=2.0)
        assert abs(width_at_level(trace, HALF_POWER_DB) - 100.0) <= 2.0

    def test_half_power_roundtrip_gaussian(self):
        trace = gaussian_trace(100.0, step=2.0)
        assert abs(width_at_level(trace, HALF_POWER_DB) - 100.0) <= 2.0

    def test_gaussian_20db_factor(self):
        trace = gaussian_trace(100.0)
        w20 = width_at_level(trace, 20.0)
        assert w20 == pytest.approx(GAUSS_20DB * 100.0, rel=5e-3)

    def test_level_not_crossed(self):
        trace = gaussian_trace(100.0, half_span=120.0)
        with pytest.raises(WidthUndefinedError):
            width_at_level(trace, 40.0)

    def test_peak_on_edge(self):
        grid = FrequencyGrid(0.0, 1.0, 101)
        trace = DensityTrace(grid, np.exp(-np.linspace(0, 5, 101)))
        with pytest.raises(WidthUndefinedError):
            width_at_level(trace, 3.0)

    def test_ambiguous_two_peaks(self):
        grid = FrequencyGrid(0.0, 1.0, 101)
        values = np.ones(101) * 0.1
        values[30] = values[70] = 1.0
        trace = DensityTrace(grid, values)
        with pytest.raises(AmbiguousPeakError):
            width_at_level(trace, 3.0)
        width_at_level(trace, 3.0, allow_ties=True)  # lowest frequency wins

    def test_level_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            width_at_level(gaussian_trace(), 0.0)
