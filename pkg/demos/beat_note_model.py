"""Parameter sweeps of the analytic beat-note model.

Reproduces the four classic behaviors of a short-delay self-heterodyne
spectrum: carrier shifts translate the trace, optical power moves it
vertically, the linewidth sets the peak/trough contrast of the coherence
envelope, and the fiber length sets the extrema spacing.  Traces land in
CSV files next to this script for plotting with any tool.
"""

import numpy as np

from beatnote import (
    DshiParams,
    FrequencyGrid,
    analytic_psd,
    extrema_spacing,
    measure_envelope_contrast,
    predict_extrema,
    write_trace,
)


def grid_about(center, half_span, step):
    n = int(half_span / step)
    return FrequencyGrid(center - n * step, step, 2 * n + 1)


print("sweep 1: linewidth sets the envelope contrast (5 km fiber, 7 MHz EOM)")
print("  linewidth   first peak/trough contrast")
for fwhm in (10.0, 100.0, 1000.0, 10000.0):
    params = DshiParams(eom_frequency=7e6, laser_fwhm=fwhm)
    trace = analytic_psd(params, grid_about(7e6, 80e3, 20.0))
    contrast, _, _ = measure_envelope_contrast(trace, params, 1, 2)
    write_trace(trace, f"trace_linewidth_{fwhm:g}.csv")
    print(f"  {fwhm:9.0f} Hz {contrast:10.2f} dB")

print("\nsweep 2: fiber length sets the extrema spacing c/(2nL)")
for length in (2.5e3, 5e3, 10e3):
    params = DshiParams(eom_frequency=7e6, laser_fwhm=100.0, fiber_length=length)
    spacing = extrema_spacing(params)
    first = predict_extrema(params, 3)
    kinds = ", ".join(f"{e.kind}@{(e.frequency - 7e6) / 1e3:.1f}kHz" for e in first)
    print(f"  L={length / 1e3:4.1f} km: spacing={spacing / 1e3:6.2f} kHz ({kinds})")

print("\nsweep 3: power and carrier shifts leave the lineshape untouched")
base = analytic_psd(DshiParams(eom_frequency=7e6, laser_fwhm=100.0),
                    grid_about(7e6, 80e3, 20.0))
boosted = analytic_psd(
    DshiParams(eom_frequency=7e6, laser_fwhm=100.0, optical_power=2.0),
    grid_about(7e6, 80e3, 20.0))
shifted = analytic_psd(DshiParams(eom_frequency=9e6, laser_fwhm=100.0),
                       grid_about(9e6, 80e3, 20.0))
gain = 10.0 * np.log10(boosted.values / base.values)
print(f"  2x power: uniform {gain.mean():.2f} dB offset "
      f"(spread {np.ptp(gain):.2e} dB)")
print(f"  9 MHz carrier: values identical to the 7 MHz trace: "
      f"{bool(np.array_equal(shifted.values, base.values))}")
