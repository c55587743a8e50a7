"""Seeded synthetic measurement data for round-trip checks and the fit command."""
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spiraldrive.engine.analysis.odmr_engine import NVModel, OdmrPoint, odmr_transitions
from spiraldrive.engine.analysis.rabi_engine import RabiFit, RabiTrace, decaying_sine


def synthetic_rabi_trace(frequency_khz: float, current: float = 1.0, rng: Optional[np.random.Generator] = None,
                         noise: float = 0.0, duration_us: float = 10.0, samples: int = 201,
                         decay_us: float = 8.0, amplitude: float = 0.4, baseline: float = 0.5,
                         phase: float = 0.3) -> RabiTrace:
    """Decaying sine with Gaussian noise of std `noise * amplitude`."""
    times = np.linspace(0.0, duration_us, samples)
    signal = decaying_sine(times, baseline, amplitude, decay_us, frequency_khz * 1e-3, phase)
    if noise > 0.0:
        rng = rng or np.random.default_rng()
        signal = signal + rng.normal(0.0, noise * amplitude, samples)
    return RabiTrace(times=times, signal=signal, current=current)


def synthetic_odmr_series(model: NVModel, currents: Sequence[float], rng: Optional[np.random.Generator] = None,
                          noise_mhz: float = 0.0) -> List[OdmrPoint]:
    rows = []
    for current in currents:
        f_minus, f_plus = odmr_transitions(model, current)
        if noise_mhz > 0.0:
            rng = rng or np.random.default_rng()
            f_minus += rng.normal(0.0, noise_mhz)
            f_plus += rng.normal(0.0, noise_mhz)
        rows.append((float(current), f_minus, f_plus))
    return rows


def synthetic_rabi_line(slope_khz_per_a: float, currents: Sequence[float], intercept_khz: float = 0.0,
                        rng: Optional[np.random.Generator] = None, noise_khz: float = 0.0) -> List[Tuple[float, RabiFit]]:
    """Per-current fit results scattered about a straight line, stderr = noise_khz."""
    fits = []
    for current in currents:
        frequency = slope_khz_per_a * current + intercept_khz
        if noise_khz > 0.0:
            rng = rng or np.random.default_rng()
            frequency += rng.normal(0.0, noise_khz)
        fits.append((float(current), RabiFit(rabi_frequency=frequency, decay_time=1.0, amplitude=1.0,
                                             phase=0.0, baseline=0.0, frequency_stderr=noise_khz)))
    return fits
