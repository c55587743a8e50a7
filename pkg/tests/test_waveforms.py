"""
SpiralDrive: Waveform Test Suite
================================
1. Error-function envelope (edges, flat top, symmetry)
2. Offset-sine pulses and their parameter checks
3. DC component against its closed form
4. Spectral filter, leakage and the constraint projection
"""
import math

import numpy as np
import pytest

from spiraldrive.engine.errors import ContractError, DomainError
from spiraldrive.engine.spin_core import DriveSystem
from spiraldrive.engine.waveforms import (
    ControlWaveform,
    PulseSpec,
    constraint_projection,
    dc_component,
    dc_component_closed_form,
    endpoint_slope,
    erf_envelope,
    offset_sine,
    spectral_filter,
    spectral_leakage,
)

SYSTEM = DriveSystem(omega0=1.0, omega_d=0.5, theta_d=math.radians(35.3))


def _spec(**overrides):
    fields = {"offset_a": 0.0, "phase_phi": 0.0, "rise_time_dt": math.pi / 10, "duration_tpi": 2 * math.pi + 0.2 * math.pi}
    fields.update(overrides)
    return PulseSpec(**fields)


# ============================================================
# MODULE 1: ERROR-FUNCTION ENVELOPE
# ============================================================

class TestErfEnvelope:
    T_PI, DT = 6.0, 0.5

    def test_edges_are_exactly_zero(self):
        values = erf_envelope(np.array([0.0, self.T_PI]), self.T_PI, self.DT)
        assert values[0] == 0.0
        assert values[1] == 0.0

    def test_centre_is_one(self):
        assert erf_envelope(0.5 * self.T_PI, self.T_PI, self.DT) >= 0.999

    def test_mirror_symmetric(self):
        t = np.linspace(0.0, self.T_PI, 257)
        assert np.allclose(erf_envelope(t, self.T_PI, self.DT), erf_envelope(self.T_PI - t, self.T_PI, self.DT),
                           atol=1e-14)

    def test_rise_is_monotone(self):
        t = np.linspace(0.0, 0.5 * self.T_PI, 200)
        assert np.all(np.diff(erf_envelope(t, self.T_PI, self.DT)) >= -1e-15)

    def test_too_short_duration_rejected(self):
        with pytest.raises(DomainError):
            erf_envelope(0.1, 0.8, 0.5)


# ============================================================
# MODULE 2: OFFSET-SINE PULSES
# ============================================================

class TestOffsetSine:

    def test_pure_dc_offset_ignores_phase(self):
        """a = 1 gives f = eps(t) whatever the phase."""
        w1 = offset_sine(_spec(offset_a=1.0, phase_phi=0.7), SYSTEM, 301)
        w2 = offset_sine(_spec(offset_a=1.0, phase_phi=2.1), SYSTEM, 301)
        spec = _spec()
        assert np.array_equal(w1.values, erf_envelope(w1.times, spec.duration_tpi, spec.rise_time_dt))
        assert np.array_equal(w1.values, w2.values)

    def test_rectangular_zero_offset_is_plain_sine(self):
        spec = _spec(envelope_kind="rectangular", rise_time_dt=0.0, phase_phi=0.4)
        w = offset_sine(spec, SYSTEM, 500)
        assert np.allclose(w.values, np.sin(w.times + 0.4), atol=1e-12)

    def test_erf_pulse_starts_and_ends_at_zero(self):
        w = offset_sine(_spec(offset_a=-0.3, phase_phi=math.pi / 4), SYSTEM)
        assert abs(w.values[0]) == 0.0
        assert abs(w.values[-1]) == 0.0
        assert w.peak <= 1.0

    def test_amplitude_bounded_for_random_specs(self, rng):
        for _ in range(20):
            spec = _spec(offset_a=float(rng.uniform(-1, 1)), phase_phi=float(rng.uniform(0, 2 * math.pi)))
            assert offset_sine(spec, SYSTEM).peak <= 1.0

    def test_phase_wraps_to_the_same_spec(self):
        assert _spec(phase_phi=0.7 + 2 * math.pi).phase_phi == _spec(phase_phi=0.7).phase_phi

    def test_offset_beyond_one_rejected(self):
        with pytest.raises(DomainError):
            _spec(offset_a=1.2)

    def test_duration_shorter_than_two_rise_times_rejected(self):
        with pytest.raises(DomainError):
            _spec(duration_tpi=0.5)

    def test_unknown_envelope_rejected(self):
        with pytest.raises(ValueError):
            _spec(envelope_kind="gaussian")


class TestControlWaveform:

    def test_nonuniform_grid_rejected(self):
        with pytest.raises(ContractError):
            ControlWaveform(times=[0.0, 1.0, 3.0], values=[0.0, 0.1, 0.0])

    def test_grid_must_start_at_zero(self):
        with pytest.raises(ContractError):
            ControlWaveform(times=[1.0, 2.0], values=[0.0, 0.0])

    def test_constrained_amplitude_limit(self):
        with pytest.raises(ContractError):
            ControlWaveform.uniform(1.0, [0.0, 1.5, 0.0])
        assert ControlWaveform.uniform(1.0, [0.0, 1.5, 0.0], unconstrained=True).peak == 1.5


# ============================================================
# MODULE 3: DC COMPONENT
# ============================================================

class TestDcComponent:

    def test_constant_drive(self):
        w = ControlWaveform.uniform(math.pi / 0.5, np.ones(101))
        assert dc_component(w) == pytest.approx(2.0, abs=1e-12)

    def test_full_period_sine_has_no_dc(self):
        t = np.linspace(0.0, 2 * math.pi, 801)
        assert abs(dc_component(ControlWaveform(times=t, values=np.sin(t)))) < 1e-12

    def test_quarter_period_cosine(self):
        """sin(w0 t + pi/2) over pi / (2 w0) averages to 4 / pi."""
        duration = math.pi / 2
        t = np.linspace(0.0, duration, 2001)
        w = ControlWaveform(times=t, values=np.sin(t + math.pi / 2))
        assert dc_component_closed_form(1.0, math.pi / 2, duration) == pytest.approx(4 / math.pi)
        assert dc_component(w) == pytest.approx(4 / math.pi, abs=1e-6)

    def test_half_period_from_crest_is_zero(self):
        duration = math.pi
        t = np.linspace(0.0, duration, 2001)
        w = ControlWaveform(times=t, values=np.sin(t + math.pi / 2))
        assert dc_component_closed_form(1.0, math.pi / 2, duration) == pytest.approx(0.0, abs=1e-15)
        assert abs(dc_component(w)) < 1e-6

    def test_linear(self, rng):
        t = np.linspace(0.0, 3.0, 301)
        a, b = rng.uniform(-1, 1, 301), rng.uniform(-1, 1, 301)
        wa, wb = ControlWaveform(times=t, values=a), ControlWaveform(times=t, values=b)
        combined = ControlWaveform(times=t, values=2 * a + b, unconstrained=True)
        assert dc_component(combined) == pytest.approx(2 * dc_component(wa) + dc_component(wb), abs=1e-12)


# ============================================================
# MODULE 4: SPECTRAL FILTER AND PROJECTION
# ============================================================

def _square_wave(n_periodic=4096):
    t = np.linspace(0.0, 2 * math.pi, n_periodic + 1)
    return ControlWaveform(times=t, values=np.sign(np.sin(t)))


class TestSpectralFilter:

    def test_in_band_tone_unchanged(self):
        t = np.linspace(0.0, 4 * math.pi, 513)
        w = ControlWaveform(times=t, values=np.sin(t))
        filtered = spectral_filter(w, 10.7)
        assert math.sqrt(float(np.mean((filtered.values - w.values) ** 2))) < 1e-9

    def test_square_wave_keeps_harmonics_up_to_nine(self):
        """Truncated Fourier series of a unit square wave, odd harmonics 1..9."""
        filtered = spectral_filter(_square_wave(), 10.7)
        expected = math.sqrt(sum(0.5 * (4 / (math.pi * k)) ** 2 for k in (1, 3, 5, 7, 9)))
        rms = math.sqrt(float(np.mean(filtered.values[:-1] ** 2)))
        assert rms == pytest.approx(expected, abs=2e-3)
        assert rms == pytest.approx(0.9796, abs=2e-3)

    def test_endpoints_pinned_to_zero(self, rng):
        w = ControlWaveform.uniform(5.0, rng.uniform(-1, 1, 257))
        filtered = spectral_filter(w, 4.0)
        assert filtered.values[0] == 0.0
        assert filtered.values[-1] == 0.0

    def test_idempotent(self, rng):
        w = ControlWaveform.uniform(5.0, rng.uniform(-1, 1, 257))
        once = spectral_filter(w, 4.0)
        twice = spectral_filter(once, 4.0)
        assert math.sqrt(float(np.mean((once.values - twice.values) ** 2))) < 1e-12

    def test_cutoff_below_carrier_is_flagged(self):
        t = np.linspace(0.0, 4 * math.pi, 513)
        filtered = spectral_filter(ControlWaveform(times=t, values=np.sin(t)), 0.5, carrier=1.0)
        assert "carrier-removed" in filtered.flags

    def test_non_positive_cutoff_rejected(self):
        with pytest.raises(ContractError):
            spectral_filter(_square_wave(64), 0.0)


class TestLeakageAndProjection:

    def test_tone_has_no_leakage(self):
        t = np.linspace(0.0, 4 * math.pi, 513)
        assert spectral_leakage(ControlWaveform(times=t, values=np.sin(t)), 10.7) < 1e-12

    def test_square_wave_leaks(self):
        assert spectral_leakage(_square_wave(), 10.7) > 0.05

    def test_projection_meets_every_constraint(self, rng):
        dt = 8.0 / 512
        projected = constraint_projection(rng.uniform(-1, 1, 513), dt, 10.7)
        w = ControlWaveform.uniform(8.0, projected, unconstrained=True)
        assert projected[0] == 0.0
        assert projected[-1] == 0.0
        assert abs(endpoint_slope(w)) < 1e-10
        assert spectral_leakage(w, 10.7) < 1e-12

    def test_projection_is_idempotent(self, rng):
        dt = 8.0 / 512
        once = constraint_projection(rng.uniform(-1, 1, 513), dt, 10.7)
        twice = constraint_projection(once, dt, 10.7)
        assert np.max(np.abs(once - twice)) < 1e-12
