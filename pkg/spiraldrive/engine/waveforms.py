"""
Drive waveforms: the offset-sine family with its error-function envelope,
sampled control waveforms, and spectral diagnostics.
"""
import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator
from scipy.special import erf

from spiraldrive.engine.errors import ContractError, DomainError
from spiraldrive.engine.spin_core import DriveSystem
from spiraldrive.engine.utils import TWO_PI, canonical_phase

log = logging.getLogger(__name__)

EnvelopeKind = Literal["error-function", "rectangular"]

SAMPLES_PER_PERIOD = 64
SPACING_RTOL = 1e-9
AMPLITUDE_SLACK = 1e-12


def default_rise_time(omega0: float) -> float:
    return math.pi / (10.0 * omega0)


# --- Offset-sine pulses ---

class PulseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    offset_a: float = 0.0
    phase_phi: float = 0.0
    rise_time_dt: float
    duration_tpi: float
    envelope_kind: EnvelopeKind = "error-function"

    @field_validator("phase_phi")
    @classmethod
    def _wrap_phase(cls, value: float) -> float:
        return canonical_phase(value)

    @model_validator(mode="after")
    def _check(self):
        if not abs(self.offset_a) <= 1.0:
            raise DomainError(f"offset a must satisfy |a| <= 1, got {self.offset_a!r}")
        if not (math.isfinite(self.duration_tpi) and self.duration_tpi > 0.0):
            raise DomainError(f"pulse duration must be positive, got {self.duration_tpi!r}")
        if self.envelope_kind == "error-function":
            if not self.rise_time_dt > 0.0:
                raise DomainError(f"rise time must be positive, got {self.rise_time_dt!r}")
            if not self.duration_tpi > 2.0 * self.rise_time_dt:
                raise DomainError(
                    f"duration {self.duration_tpi:.6g} too short for rise time {self.rise_time_dt:.6g}"
                )
        elif self.rise_time_dt < 0.0:
            raise DomainError(f"rise time must be non-negative, got {self.rise_time_dt!r}")
        return self

    def with_parameters(self, offset_a: float, phase_phi: float) -> "PulseSpec":
        return PulseSpec(
            offset_a=offset_a,
            phase_phi=phase_phi,
            rise_time_dt=self.rise_time_dt,
            duration_tpi=self.duration_tpi,
            envelope_kind=self.envelope_kind,
        )


def _erf_profile(t, t_pi: float, dt: float):
    return 0.5 * (erf(2.0 * (t - dt) / dt) + erf(2.0 * (t_pi - t - dt) / dt))


def erf_envelope(t, t_pi: float, dt: float):
    """
    Error-function envelope: rise over ~dt, flat top, mirrored fall.
    Shifted and rescaled so it is exactly 0 at both edges and 1 at t_pi / 2.
    """
    if not t_pi > 2.0 * dt > 0.0:
        raise DomainError(f"envelope needs t_pi > 2*dt > 0 (t_pi={t_pi!r}, dt={dt!r})")
    t = np.asarray(t, dtype=float)
    edge = _erf_profile(0.0, t_pi, dt)
    top = _erf_profile(0.5 * t_pi, t_pi, dt)
    return np.clip((_erf_profile(t, t_pi, dt) - edge) / (top - edge), 0.0, 1.0)


class OffsetSinePulse:
    """
    f(t) = eps(t) (a + (1 - |a|) sin(w0 t + phi)), evaluated analytically.
    `scale` multiplies the whole waveform (least-squares fits may float it).
    """

    def __init__(self, spec: PulseSpec, omega0: float, scale: float = 1.0):
        self.spec = spec
        self.omega0 = omega0
        self.scale = scale

    @property
    def duration(self) -> float:
        return self.spec.duration_tpi

    def sample(self, t) -> np.ndarray:
        spec = self.spec
        t = np.asarray(t, dtype=float)
        a = spec.offset_a
        f = a + (1.0 - abs(a)) * np.sin(self.omega0 * t + spec.phase_phi)
        if spec.envelope_kind == "error-function":
            f = erf_envelope(t, spec.duration_tpi, spec.rise_time_dt) * f
        return self.scale * np.clip(f, -1.0, 1.0)


def default_samples(duration: float, omega0: float) -> int:
    return max(2, math.ceil(SAMPLES_PER_PERIOD * duration * omega0 / TWO_PI) + 1)


# --- Sampled waveforms ---

class ControlWaveform(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    values: np.ndarray
    unconstrained: bool = False         # OCT iterates may exceed |f| = 1
    flags: Tuple[str, ...] = ()

    @field_validator("times", "values", mode="before")
    @classmethod
    def _as_float_array(cls, value):
        arr = np.array(value, dtype=float)
        if arr.ndim != 1:
            raise ValueError("waveform arrays must be one-dimensional")
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_grid(self):
        times, values = self.times, self.values
        if len(times) < 2 or len(values) != len(times):
            raise ContractError("waveform needs >= 2 samples with one value per time")
        if times[0] != 0.0:
            raise ContractError(f"waveform must start at t = 0, got {times[0]!r}")
        steps = np.diff(times)
        if np.any(steps <= 0.0) or not np.allclose(steps, steps[0], rtol=SPACING_RTOL, atol=0.0):
            raise ContractError("waveform times must be uniformly spaced and increasing")
        if not np.all(np.isfinite(values)):
            raise ContractError("waveform values must be finite")
        if not self.unconstrained and np.max(np.abs(values)) > 1.0 + AMPLITUDE_SLACK:
            raise ContractError(f"|f| reaches {np.max(np.abs(values)):.6g} > 1 on a constrained waveform")
        return self

    @classmethod
    def uniform(cls, duration: float, values, unconstrained: bool = False,
                flags: Tuple[str, ...] = ()) -> "ControlWaveform":
        values = np.asarray(values, dtype=float)
        return cls(times=np.linspace(0.0, duration, len(values)), values=values,
                   unconstrained=unconstrained, flags=flags)

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return self.duration / (len(self.times) - 1)

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def sample(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.values)


def offset_sine(spec: PulseSpec, system: DriveSystem, n_samples: Optional[int] = None) -> ControlWaveform:
    if n_samples is None:
        n_samples = default_samples(spec.duration_tpi, system.omega0)
    if n_samples < 2:
        raise ContractError("n_samples must be >= 2")
    times = np.linspace(0.0, spec.duration_tpi, n_samples)
    return ControlWaveform(times=times, values=OffsetSinePulse(spec, system.omega0).sample(times))


# --- Diagnostics ---

def dc_component(w: ControlWaveform) -> float:
    """(2 / T) * integral of f, trapezoidal."""
    return 2.0 / w.duration * float(np.trapezoid(w.values, w.times))


def dc_component_closed_form(omega0: float, phase: float, duration: float) -> float:
    """(2 / T) * integral of sin(w0 t + phi) over [0, T]."""
    return 2.0 / (duration * omega0) * (math.cos(phase) - math.cos(omega0 * duration + phase))


def _angular_bins(n: int, dt: float) -> np.ndarray:
    return TWO_PI * np.fft.rfftfreq(n, dt)


def _band_mask(n: int, dt: float, cutoff: float) -> np.ndarray:
    return (_angular_bins(n, dt) <= cutoff).astype(float)


def spectral_derivative(periodic: np.ndarray, dt: float) -> np.ndarray:
    """d/dt of a periodic sample sequence (Nyquist bin dropped)."""
    n = len(periodic)
    spectrum = 1j * _angular_bins(n, dt) * np.fft.rfft(periodic)
    if n % 2 == 0:
        spectrum[-1] = 0.0
    return np.fft.irfft(spectrum, n=n)


def spectral_filter(w: ControlWaveform, cutoff: float, carrier: Optional[float] = None) -> ControlWaveform:
    """
    Zeroes every periodic DFT component above `cutoff`, then subtracts the
    linear ramp through the two endpoint values so both ends are exactly 0.
    """
    if not cutoff > 0.0:
        raise ContractError(f"cutoff must be positive, got {cutoff!r}")
    periodic = np.asarray(w.values[:-1], dtype=float)
    n = len(periodic)
    if n < 2:
        filtered = np.zeros_like(w.values)
    else:
        band = np.fft.irfft(np.fft.rfft(periodic) * _band_mask(n, w.dt, cutoff), n=n)
        filtered = np.append(band, band[0])
        filtered = filtered - np.linspace(filtered[0], filtered[-1], len(filtered))
        filtered[0] = filtered[-1] = 0.0

    flags = w.flags
    if carrier is not None and cutoff < carrier:
        log.warning(f"⚠️ Spectral cutoff {cutoff:.4g} is below the carrier {carrier:.4g}; the drive loses its resonance")
        flags = flags + ("carrier-removed",)
    return ControlWaveform(times=w.times, values=filtered, unconstrained=True, flags=flags)


def spectral_leakage(w: ControlWaveform, cutoff: float) -> float:
    """RMS fraction of the periodic spectrum above `cutoff`."""
    periodic = np.asarray(w.values[:-1], dtype=float)
    n = len(periodic)
    power = np.abs(np.fft.rfft(periodic)) ** 2
    weight = np.full(len(power), 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    total = float(np.sum(weight * power))
    if total == 0.0:
        return 0.0
    above = float(np.sum((weight * power)[_angular_bins(n, w.dt) > cutoff]))
    return math.sqrt(above / total)


def constraint_projection(values: np.ndarray, dt: float, cutoff: float) -> np.ndarray:
    """
    Orthogonal projection onto periodic waveforms band-limited to `cutoff`
    whose value and slope vanish at t = 0 (and so at t = T).
    Input and output include the duplicated end sample.
    """
    periodic = np.asarray(values[:-1], dtype=float)
    n = len(periodic)
    mask = _band_mask(n, dt, cutoff)
    y = np.fft.irfft(np.fft.rfft(periodic) * mask, n=n)

    value_probe = np.fft.irfft(mask, n=n)                 # band-limited delta at t = 0
    slope_probe = spectral_derivative(value_probe, dt)    # orthogonal to value_probe
    for probe in (value_probe, slope_probe):
        norm = float(probe @ probe)
        if norm > 0.0:
            y = y - (float(y @ probe) / norm) * probe

    out = np.append(y, 0.0)
    out[0] = 0.0
    return out


def endpoint_slope(w: ControlWaveform) -> float:
    """Spectral estimate of f'(0) (= f'(T) for a periodic band-limited waveform)."""
    return float(spectral_derivative(np.asarray(w.values[:-1], dtype=float), w.dt)[0])
