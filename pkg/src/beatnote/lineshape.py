"""Spectral lineshapes: Gaussian, Lorentzian, their Voigt convolution, and
width measurements at arbitrary dB levels.

All shapes are normalized to unit integral and expressed through their full
width at half maximum (FWHM), the natural parameter for linewidth work.
Widths are measured on power quantities, so "x dB below peak" always means
a factor 10**(-x/10) in value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    AmbiguousPeakError,
    InvalidParameterError,
    ResolutionError,
    WidthUndefinedError,
)

__all__ = [
    "HALF_POWER_DB",
    "LORENTZIAN_20DB_FACTOR",
    "GAUSSIAN_20DB_FACTOR",
    "FrequencyGrid",
    "LineshapeParams",
    "DensityTrace",
    "eval_gaussian",
    "eval_lorentzian",
    "eval_voigt_numeric",
    "voigt_fwhm_approx",
    "voigt_grid",
    "voigt_width_numeric",
    "width_at_level",
]

# Exact half-power level in dB; using a rounded "3 dB" would bias widths by 0.34%.
HALF_POWER_DB = 10.0 * math.log10(2.0)

# Full width of a Lorentzian at 1/100 of its peak, in units of its FWHM.
LORENTZIAN_20DB_FACTOR = math.sqrt(99.0)

# Same for a Gaussian: sqrt(log2(100)).
GAUSSIAN_20DB_FACTOR = math.sqrt(math.log2(100.0))

# Voigt-width approximation constants (accurate to ~0.02% over all mixing ratios).
VOIGT_WIDTH_CL = 1.0692
VOIGT_WIDTH_CQ = 0.866639

# Width ratio beyond which the narrow component is numerically a delta on any
# reasonable grid; voigt_grid() then grids on the wide component alone.
_DEGENERATE_WIDTH_RATIO = 4000.0


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency axis: point(i) = start + i*step, i in [0, count)."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidParameterError(f"grid step must be > 0, got {self.step}")
        if self.count < 2:
            raise InvalidParameterError(f"grid needs >= 2 points, got {self.count}")

    @property
    def stop(self) -> float:
        """Last grid point (inclusive)."""
        return self.start + (self.count - 1) * self.step

    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def index_of(self, frequency: float) -> int:
        """Index of the grid point nearest to `frequency`."""
        return int(round((frequency - self.start) / self.step))

    def covers(self, frequency: float) -> bool:
        return self.start <= frequency <= self.stop


@dataclass(frozen=True)
class LineshapeParams:
    """Center frequency plus Gaussian/Lorentzian FWHM of a Voigt profile."""

    center: float
    fwhm_gaussian: float = 0.0
    fwhm_lorentzian: float = 0.0

    def __post_init__(self):
        if self.fwhm_gaussian < 0 or self.fwhm_lorentzian < 0:
            raise InvalidParameterError("linewidths must be >= 0")
        if self.fwhm_gaussian == 0 and self.fwhm_lorentzian == 0:
            raise InvalidParameterError("at least one linewidth must be > 0")


@dataclass(frozen=True)
class DensityTrace:
    """Spectral density samples (1/Hz) on a uniform grid."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.count,):
            raise InvalidParameterError(
                f"values shape {values.shape} does not match grid count {self.grid.count}"
            )
        object.__setattr__(self, "values", values)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.grid.step))


def eval_gaussian(grid: FrequencyGrid, f0: float, fwhm: float) -> DensityTrace:
    """Unit-integral Gaussian of the given FWHM centered at f0."""
    if not fwhm > 0:
        raise InvalidParameterError(f"gaussian fwhm must be > 0, got {fwhm}")
    x = grid.points() - f0
    peak = 2.0 * math.sqrt(math.log(2.0)) / (math.sqrt(math.pi) * fwhm)
    values = peak * np.exp(-4.0 * math.log(2.0) * (x / fwhm) ** 2)
    return DensityTrace(grid, values)


def eval_lorentzian(grid: FrequencyGrid, f0: float, fwhm: float) -> DensityTrace:
    """Unit-integral Lorentzian of the given FWHM centered at f0."""
    if not fwhm > 0:
        raise InvalidParameterError(f"lorentzian fwhm must be > 0, got {fwhm}")
    x = grid.points() - f0
    values = (fwhm / (2.0 * math.pi)) / (x * x + fwhm * fwhm / 4.0)
    return DensityTrace(grid, values)


def voigt_fwhm_approx(fwhm_lorentzian: float, fwhm_gaussian: float) -> float:
    """Closed-form Voigt FWHM from its Lorentzian and Gaussian components."""
    if fwhm_lorentzian < 0 or fwhm_gaussian < 0:
        raise InvalidParameterError("linewidths must be >= 0")
    return 0.5 * (
        VOIGT_WIDTH_CL * fwhm_lorentzian
        + math.sqrt(VOIGT_WIDTH_CQ * fwhm_lorentzian**2 + 4.0 * fwhm_gaussian**2)
    )


def eval_voigt_numeric(grid: FrequencyGrid, params: LineshapeParams) -> DensityTrace:
    """Voigt profile by direct discrete convolution of the two sampled shapes.

    The Lorentzian is sampled on `grid`, convolved with a Gaussian kernel
    sampled on symmetric offsets, and the result renormalized to unit
    trapezoidal integral.  A component narrower than step/100 is treated as a
    delta and the other pure shape is returned directly; otherwise the grid
    must put at least 20 points across the narrower FWHM and span
    +-10*(fwhm_gaussian + fwhm_lorentzian) about the center.
    """
    fg, fl, f0 = params.fwhm_gaussian, params.fwhm_lorentzian, params.center
    step = grid.step
    if fg < step / 100.0:
        if fl <= 0:
            raise InvalidParameterError("both linewidths are degenerate on this grid")
        return eval_lorentzian(grid, f0, fl)
    if fl < step / 100.0:
        return eval_gaussian(grid, f0, fg)

    narrower = min(fg, fl)
    if narrower / step < 20.0:
        raise ResolutionError(
            f"need >= 20 points across the narrower FWHM ({narrower:g} Hz), "
            f"grid step is {step:g} Hz"
        )
    half_span = 10.0 * (fg + fl)
    if grid.start > f0 - half_span or grid.stop < f0 + half_span:
        raise ResolutionError(
            f"grid must span +-{half_span:g} Hz about {f0:g} Hz to hold the Voigt wings"
        )

    lorentz = eval_lorentzian(grid, f0, fl).values
    m = int(math.ceil(4.0 * fg / step))
    offsets = step * np.arange(-m, m + 1)
    peak = 2.0 * math.sqrt(math.log(2.0)) / (math.sqrt(math.pi) * fg)
    kernel = peak * np.exp(-4.0 * math.log(2.0) * (offsets / fg) ** 2)
    values = fftconvolve(lorentz, kernel, mode="same") * step
    values = np.maximum(values, 0.0)
    values /= np.trapezoid(values, dx=step)
    return DensityTrace(grid, values)


def voigt_grid(params: LineshapeParams, points_per_width: int = 40,
               extent_factor: float = 20.0) -> FrequencyGrid:
    """Grid suited to eval_voigt_numeric: +-extent_factor*(sum of widths) span,
    points_per_width samples across the narrower resolvable component."""
    fg, fl = params.fwhm_gaussian, params.fwhm_lorentzian
    widths = [w for w in (fg, fl) if w > 0]
    wider = max(widths)
    narrower = min(widths)
    if narrower >= wider / _DEGENERATE_WIDTH_RATIO:
        step = narrower / points_per_width
    else:
        # The narrow component is a delta at any usable resolution; grid on
        # the wide one and let the limit branch of eval_voigt_numeric fire.
        step = wider / points_per_width
    half_span = extent_factor * (fg + fl)
    half_count = int(math.ceil(half_span / step))
    return FrequencyGrid(params.center - half_count * step, step, 2 * half_count + 1)


def voigt_width_numeric(fwhm_lorentzian: float, fwhm_gaussian: float,
                        level_db: float = HALF_POWER_DB,
                        points_per_width: int = 40) -> float:
    """Width of the numerically convolved Voigt at `level_db` below its peak."""
    params = LineshapeParams(0.0, fwhm_gaussian, fwhm_lorentzian)
    grid = voigt_grid(params, points_per_width)
    return width_at_level(eval_voigt_numeric(grid, params), level_db)


def _linear_values(trace) -> np.ndarray:
    to_linear = getattr(trace, "linear_values", None)
    if to_linear is not None:
        return to_linear()
    return np.asarray(trace.values, dtype=float)


def _interpolated_peak(values: np.ndarray, i: int) -> float:
    """Parabolic refinement of the peak height through its three samples."""
    if 0 < i < len(values) - 1:
        a, b, c = values[i - 1], values[i], values[i + 1]
        denom = a - 2.0 * b + c
        if denom < 0:
            delta = 0.5 * (a - c) / denom
            if abs(delta) <= 1.0:
                return b - 0.25 * (a - c) * delta
    return float(values[i])


def width_at_level(trace, level_db: float, allow_ties: bool = False) -> float:
    """Full width of the trace's peak at `level_db` (power dB) below the peak.

    The two crossings nearest the peak are located by linear interpolation
    between adjacent samples.  Raises WidthUndefinedError when the level is
    not crossed inside the grid (or the peak sits on a grid edge) and
    AmbiguousPeakError when several separated samples tie for the maximum
    (with allow_ties the lowest-frequency one wins).
    """
    if not level_db > 0:
        raise InvalidParameterError(f"level must be > 0 dB, got {level_db}")
    values = _linear_values(trace)
    grid = trace.grid
    vmax = values.max()
    peaks = np.flatnonzero(values == vmax)
    if len(peaks) > 1 and np.any(np.diff(peaks) > 1) and not allow_ties:
        raise AmbiguousPeakError(
            f"{len(peaks)} samples tie for the maximum; peak is ambiguous"
        )
    ipk = int(peaks[0])
    if ipk == 0 or ipk == grid.count - 1:
        raise WidthUndefinedError("global maximum sits on a grid edge")

    threshold = _interpolated_peak(values, ipk) * 10.0 ** (-level_db / 10.0)

    below_left = np.flatnonzero(values[:ipk] < threshold)
    if len(below_left) == 0:
        raise WidthUndefinedError(
            f"{level_db:g} dB level not crossed on the low-frequency side"
        )
    i = int(below_left[-1])
    f_left = grid.start + grid.step * (
        i + (threshold - values[i]) / (values[i + 1] - values[i])
    )

    below_right = np.flatnonzero(values[ipk + 1:] < threshold)
    if len(below_right) == 0:
        raise WidthUndefinedError(
            f"{level_db:g} dB level not crossed on the high-frequency side"
        )
    j = ipk + 1 + int(below_right[0])
    f_right = grid.start + grid.step * (
        j - (threshold - values[j]) / (values[j - 1] - values[j])
    )
    return f_right - f_left
