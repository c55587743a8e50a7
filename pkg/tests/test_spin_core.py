"""
SpiralDrive: Spin Core Test Suite
=================================
Tests the driven two-level propagator in isolation:
1. Drive system and Hamiltonian (ranges, cancellation point)
2. Propagation (normalization, refinement, closed-form limits)
3. Integrator order and time-reversal symmetry
4. Fidelity, RWA reference and Bloch vectors
"""
import math

import numpy as np
import pytest

from spiraldrive.engine.errors import ContractError, ConvergenceError, DomainError
from spiraldrive.engine.pulse_engine import pulse_spec, simulate_pulse
from spiraldrive.engine.spin_core import (
    DriveSystem,
    PropagatorConfig,
    SpinState,
    Trajectory,
    bloch_vectors,
    dc_pi_duration,
    evolve_fixed,
    exact_cancellation_amplitude,
    hamiltonian_at,
    propagate,
    pulse_fidelity,
    rwa_reference,
    shortest_period,
)
from spiraldrive.engine.waveforms import ControlWaveform, OffsetSinePulse, offset_sine

TILT = math.radians(35.3)


# ============================================================
# MODULE 1: DRIVE SYSTEM AND HAMILTONIAN
# ============================================================

class TestDriveSystem:

    def test_untilted_hamiltonian(self):
        """theta_d = 0: H = (w0/2) sz + Wd f sx."""
        system = DriveSystem(omega0=1.0, omega_d=1.0, theta_d=0.0)
        h = hamiltonian_at(system, 0.5)
        assert np.allclose(h, [[0.5, 0.5], [0.5, -0.5]], atol=1e-15)

    def test_tilted_hamiltonian_adds_longitudinal_drive(self, tilted_system):
        h = hamiltonian_at(tilted_system, 1.0)
        assert h[0, 0].real == pytest.approx(0.5 + math.tan(TILT), abs=1e-15)
        assert h[0, 1].real == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(h, h.conj().T)

    def test_cancellation_point_has_no_diagonal(self, cancellation_system):
        """f = -1 at Wd = w0 / (2 tan theta_d) removes the splitting entirely."""
        h = hamiltonian_at(cancellation_system, -1.0)
        assert abs(h[0, 0]) < 1e-15
        assert abs(h[1, 1]) < 1e-15

    def test_cancellation_amplitude_value(self):
        assert exact_cancellation_amplitude(1.0, TILT) == pytest.approx(0.7059, abs=1e-3)

    def test_untilted_drive_has_no_cancellation_amplitude(self):
        with pytest.raises(DomainError):
            exact_cancellation_amplitude(1.0, 0.0)

    def test_tilt_at_right_angle_rejected(self):
        with pytest.raises(DomainError):
            DriveSystem(omega0=1.0, omega_d=1.0, theta_d=math.pi / 2)

    def test_negative_amplitude_rejected(self):
        with pytest.raises(DomainError):
            DriveSystem(omega0=1.0, omega_d=-0.1)

    def test_non_positive_splitting_rejected(self):
        with pytest.raises(DomainError):
            DriveSystem(omega0=0.0)

    def test_non_finite_drive_value_rejected(self, tilted_system):
        with pytest.raises(DomainError):
            hamiltonian_at(tilted_system, float("nan"))

    def test_shortest_period_tracks_strong_drive(self, tilted_system):
        expected = 2.0 * math.pi / (1.0 + math.tan(TILT))
        assert shortest_period(tilted_system) == pytest.approx(expected)

    def test_with_amplitude_keeps_tilt(self, tilted_system):
        weaker = tilted_system.with_amplitude(0.1)
        assert weaker.theta_d == tilted_system.theta_d
        assert weaker.omega_d == 0.1


# ============================================================
# MODULE 2: PROPAGATION
# ============================================================

class TestPropagation:

    def test_dc_pi_pulse_at_cancellation(self, cancellation_system):
        """Constant f = -1 for pi / (2 Wd) flips |up> to |down>."""
        spec = pulse_spec(cancellation_system, offset=-1.0, envelope="rectangular",
                          duration=dc_pi_duration(cancellation_system))
        traj = simulate_pulse(cancellation_system, spec)
        assert traj.final_fidelity > 1.0 - 1e-10

    def test_zero_drive_only_precesses(self):
        system = DriveSystem(omega0=1.0, omega_d=0.0)
        spec = pulse_spec(system, envelope="rectangular", duration=5.0)
        traj = simulate_pulse(system, spec)
        assert np.allclose(traj.populations[:, 0], 1.0, atol=1e-12)
        assert np.allclose(traj.states[:, 0], np.exp(-0.5j * traj.times), atol=1e-9)

    def test_weak_drive_follows_rabi_formula(self):
        """Wd = w0 / 100: p_down(t) tracks sin^2(Wd t / 2) and F matches the RWA."""
        system = DriveSystem(omega0=1.0, omega_d=0.01, theta_d=0.0)
        spec = pulse_spec(system, envelope="rectangular")
        traj = simulate_pulse(system, spec)
        expected = np.sin(0.5 * system.omega_d * traj.times) ** 2
        rms = math.sqrt(float(np.mean((traj.populations[:, 1] - expected) ** 2)))
        assert rms < 0.01
        rwa = rwa_reference(system, spec.phase_phi, spec.duration_tpi)
        assert abs(traj.final_fidelity - rwa.final_fidelity) < 1e-3

    def test_populations_stay_normalized(self, tilted_system):
        traj = simulate_pulse(tilted_system, pulse_spec(tilted_system, offset=0.3, phase=1.1))
        assert np.max(np.abs(traj.populations.sum(axis=1) - 1.0)) < 1e-12
        assert traj.times[0] == 0.0
        assert traj.substeps > 0
        assert traj.refinement_delta < PropagatorConfig().convergence_tol

    def test_output_grid_is_independent_of_substeps(self, tilted_system):
        config = PropagatorConfig(output_samples=11)
        traj = simulate_pulse(tilted_system, pulse_spec(tilted_system), config)
        assert len(traj.times) == 11
        assert np.allclose(np.diff(traj.times), traj.duration / 10)

    def test_unnormalized_state_rejected(self, tilted_system):
        pulse = OffsetSinePulse(pulse_spec(tilted_system), tilted_system.omega0)
        with pytest.raises(ContractError):
            propagate(tilted_system, pulse, np.array([1.0, 1.0]))

    def test_unnormalized_spin_state_rejected(self):
        with pytest.raises(ContractError):
            SpinState(amplitudes=[1.0, 1.0])

    def test_refinement_budget_exhausted(self, tilted_system):
        config = PropagatorConfig(max_refinements=1, convergence_tol=1e-300)
        with pytest.raises(ConvergenceError) as excinfo:
            simulate_pulse(tilted_system, pulse_spec(tilted_system), config)
        assert len(excinfo.value.last_fidelities) == 2


# ============================================================
# MODULE 3: INTEGRATOR ORDER AND SYMMETRY
# ============================================================

class TestIntegrator:

    def test_second_order_convergence(self, tilted_system):
        """Halving the fixed substep shrinks the state error about fourfold."""
        pulse = OffsetSinePulse(pulse_spec(tilted_system, phase=0.4), tilted_system.omega0)
        states = [evolve_fixed(tilted_system, pulse, SpinState.up(), n) for n in (256, 512, 1024)]
        coarse = np.linalg.norm(states[0] - states[1])
        fine = np.linalg.norm(states[1] - states[2])
        assert math.log2(coarse / fine) > 1.8

    def test_fixed_steps_preserve_norm(self, tilted_system):
        pulse = OffsetSinePulse(pulse_spec(tilted_system), tilted_system.omega0)
        psi = evolve_fixed(tilted_system, pulse, SpinState.up(), 4096)
        assert abs(np.vdot(psi, psi).real - 1.0) < 1e-12

    def test_time_reversal_recovers_initial_state(self, tilted_system):
        """H is real, so the reversed drive applied to conj(psi(T)) returns conj(psi(0))."""
        w = offset_sine(pulse_spec(tilted_system, offset=0.2, phase=0.9), tilted_system, 1001)
        reverse = ControlWaveform.uniform(w.duration, w.values[::-1])
        psi = evolve_fixed(tilted_system, w, SpinState.up(), 2000)
        back = np.conj(evolve_fixed(tilted_system, reverse, np.conj(psi), 2000))
        assert np.allclose(back, [1.0, 0.0], atol=1e-9)

    def test_zero_steps_rejected(self, tilted_system):
        pulse = OffsetSinePulse(pulse_spec(tilted_system), tilted_system.omega0)
        with pytest.raises(ContractError):
            evolve_fixed(tilted_system, pulse, SpinState.up(), 0)


# ============================================================
# MODULE 4: FIDELITY, RWA REFERENCE, BLOCH VECTORS
# ============================================================

def _two_point_trajectory(final):
    final = np.asarray(final, dtype=complex)
    states = np.array([[1.0, 0.0], final], dtype=complex)
    return Trajectory(times=np.array([0.0, 1.0]), states=states, populations=np.abs(states) ** 2,
                      final_fidelity=float(abs(final[1]) ** 2))


class TestFidelityAndReferences:

    def test_fidelity_of_flipped_state(self):
        assert pulse_fidelity(_two_point_trajectory([0.0, 1.0])) == 1.0

    def test_fidelity_of_superposition(self):
        traj = _two_point_trajectory([1 / math.sqrt(2), 1j / math.sqrt(2)])
        assert pulse_fidelity(traj) == pytest.approx(0.5)

    def test_trajectory_must_start_at_zero(self):
        states = np.array([[1.0, 0.0], [1.0, 0.0]], dtype=complex)
        with pytest.raises(ContractError):
            Trajectory(times=np.array([0.5, 1.0]), states=states, populations=np.abs(states) ** 2,
                       final_fidelity=0.0)

    def test_rwa_pi_and_half_pi(self):
        system = DriveSystem(omega0=1.0, omega_d=0.5)
        full = rwa_reference(system, 0.3, math.pi / system.omega_d)
        half = rwa_reference(system, 0.3, 0.5 * math.pi / system.omega_d)
        assert full.final_fidelity == pytest.approx(1.0, abs=1e-12)
        assert half.final_fidelity == pytest.approx(0.5, abs=1e-12)

    def test_rwa_needs_drive(self):
        with pytest.raises(DomainError):
            rwa_reference(DriveSystem(omega0=1.0), 0.0, 1.0)

    def test_bloch_vectors_of_basis_states(self):
        r = 1 / math.sqrt(2)
        states = np.array([[1.0, 0.0], [r, r], [r, 1j * r], [0.0, 1.0]], dtype=complex)
        traj = Trajectory(times=np.arange(4.0), states=states, populations=np.abs(states) ** 2,
                          final_fidelity=1.0)
        vectors = bloch_vectors(traj)
        assert np.allclose(vectors, [[0, 0, 1], [1, 0, 0], [0, 1, 0], [0, 0, -1]], atol=1e-15)
