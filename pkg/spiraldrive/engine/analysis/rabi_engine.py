"""
Rabi-trace analysis: decaying-sine fits and the drive-frequency vs current line.
Times in us, frequencies reported in kHz.
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.optimize import curve_fit

from spiraldrive.engine.errors import ContractError, FitError

log = logging.getLogger(__name__)

MIN_SAMPLES = 8
PEAK_TO_FLOOR = 5.0
ZERO_PAD = 8


class RabiTrace(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray       # us
    signal: np.ndarray
    current: float          # A

    @field_validator("times", "signal", mode="before")
    @classmethod
    def _as_array(cls, value):
        arr = np.array(value, dtype=float)
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check(self):
        if self.times.ndim != 1 or len(self.times) == 0 or self.signal.shape != self.times.shape:
            raise ContractError("a Rabi trace needs matching, nonempty time and signal columns")
        if np.any(np.diff(self.times) <= 0.0):
            raise ContractError("Rabi trace times must be strictly ascending")
        return self


class RabiFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    rabi_frequency: float       # kHz
    decay_time: float           # us
    amplitude: float
    phase: float
    baseline: float
    frequency_stderr: float     # kHz
    residual_rms: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        if not (self.rabi_frequency > 0.0 and self.decay_time > 0.0):
            raise FitError(f"unphysical fit (f={self.rabi_frequency!r} kHz, tau={self.decay_time!r} us)")
        return self


class RabiLine(BaseModel):
    model_config = ConfigDict(frozen=True)

    slope: float                # kHz/A
    intercept: float            # kHz
    slope_stderr: float
    intercept_stderr: float
    stderr_defined: bool
    weighted: bool
    points: int


def decaying_sine(t, baseline, amplitude, decay, frequency, phase):
    """baseline + amplitude exp(-t / decay) sin(2 pi f t + phase); f in MHz for t in us."""
    return baseline + amplitude * np.exp(-t / decay) * np.sin(2.0 * np.pi * frequency * t + phase)


def _spectral_peak(times: np.ndarray, signal: np.ndarray) -> float:
    """Frequency (MHz) of the strongest non-DC component, zero-padded FFT."""
    step = float(np.median(np.diff(times)))
    n_fft = ZERO_PAD * (1 << int(math.ceil(math.log2(len(signal)))))
    magnitude = np.abs(np.fft.rfft(signal - signal.mean(), n=n_fft))
    freqs = np.fft.rfftfreq(n_fft, step)
    magnitude[0] = 0.0
    k = int(np.argmax(magnitude))
    floor = float(np.median(magnitude[1:]))
    if magnitude[k] == 0.0 or magnitude[k] < PEAK_TO_FLOOR * floor:
        raise FitError(f"no spectral peak above the noise floor (peak {magnitude[k]:.3g}, floor {floor:.3g})")
    return float(freqs[k])


def fit_decaying_sine(trace: RabiTrace) -> RabiFit:
    """
    Least-squares decaying-sine fit seeded from the Fourier peak.
    A few starting phases are tried and the lowest-residual solution is kept.
    """
    times, signal = trace.times, trace.signal
    if len(times) < MIN_SAMPLES:
        raise ContractError(f"need >= {MIN_SAMPLES} samples, got {len(times)}")
    if np.ptp(signal) == 0.0:
        raise FitError("constant signal: nothing to fit")

    frequency0 = _spectral_peak(times, signal)
    span = float(times[-1] - times[0])
    if frequency0 * span < 1.0:
        log.warning(f"⚠️ Rabi trace spans {frequency0 * span:.2f} periods; the fit may be poorly constrained")

    lower = [-np.inf, 0.0, 1e-6 * span, 0.0, -np.inf]
    upper = [np.inf, np.inf, np.inf, np.inf, np.inf]
    best = None
    for phase0 in (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi):
        p0 = [float(signal.mean()), 0.5 * float(np.ptp(signal)), span, frequency0, phase0]
        try:
            params, covariance = curve_fit(decaying_sine, times, signal, p0=p0, bounds=(lower, upper),
                                           ftol=1e-12, xtol=1e-12, gtol=1e-12, max_nfev=20000)
        except (RuntimeError, ValueError) as exc:
            log.debug(f"Rabi fit from phase {phase0:.2f} failed: {exc}")
            continue
        cost = float(np.sum((decaying_sine(times, *params) - signal) ** 2))
        if best is None or cost < best[0]:
            best = (cost, params, covariance)
    if best is None:
        raise FitError("decaying-sine fit failed from every starting phase")

    cost, params, covariance = best
    baseline, amplitude, decay, frequency, phase = (float(p) for p in params)
    stderr = float(np.sqrt(abs(covariance[3, 3]))) if np.all(np.isfinite(covariance)) else float("nan")
    return RabiFit(
        rabi_frequency=1e3 * frequency,
        decay_time=decay,
        amplitude=amplitude,
        phase=phase % (2.0 * math.pi),
        baseline=baseline,
        frequency_stderr=1e3 * stderr,
        residual_rms=math.sqrt(cost / len(times)),
    )


def rabi_vs_current(fits: Sequence[Tuple[float, RabiFit]]) -> RabiLine:
    """
    Weighted straight line of Rabi frequency on current, weights 1/stderr^2.
    Falls back to equal weights when any stderr is missing or zero.
    """
    if not fits:
        raise ContractError("no Rabi fits given")
    currents = np.array([c for c, _ in fits], dtype=float)
    freqs = np.array([f.rabi_frequency for _, f in fits], dtype=float)
    errors = np.array([f.frequency_stderr for _, f in fits], dtype=float)
    if len(np.unique(currents)) < 2:
        raise ContractError("need Rabi fits at >= 2 distinct currents")

    weighted = bool(np.all(np.isfinite(errors)) and np.all(errors > 0.0))
    weights = 1.0 / errors ** 2 if weighted else np.ones_like(freqs)
    if not weighted:
        log.info("🔵 Rabi line: frequency errors missing or zero, using equal weights")
    slope, intercept = np.polyfit(currents, freqs, 1, w=np.sqrt(weights))

    n = len(currents)
    total = float(weights.sum())
    mean_current = float(weights @ currents) / total
    sxx = float(weights @ (currents - mean_current) ** 2)
    if n > 2:
        residuals = freqs - (slope * currents + intercept)
        variance = float(weights @ residuals ** 2) / (n - 2)
        slope_err = math.sqrt(variance / sxx)
        intercept_err = math.sqrt(variance * (1.0 / total + mean_current ** 2 / sxx))
    else:
        slope_err = intercept_err = float("nan")
    return RabiLine(slope=float(slope), intercept=float(intercept), slope_stderr=slope_err,
                    intercept_stderr=intercept_err, stderr_defined=n > 2, weighted=weighted, points=n)
