"""
Driven two-level system.

H(t) = (w0/2) sz + Wd f(t) (sx + tan(theta_d) sz), hbar = 1, angular frequencies.
The propagator applies exact SU(2) exponentials of the midpoint Hamiltonian
per substep, so it never renormalizes.
"""
import logging
import math
from typing import List, Optional, Protocol, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from spiraldrive.engine.errors import ContractError, ConvergenceError, DomainError

log = logging.getLogger(__name__)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

NORM_TOL = 1e-12

# Most substeps held in memory at once.
_BLOCK_STEPS = 1 << 18


class Waveform(Protocol):
    """Anything that can be sampled on [0, duration]."""

    @property
    def duration(self) -> float: ...

    def sample(self, t: np.ndarray) -> np.ndarray: ...


# --- Domain types ---

class DriveSystem(BaseModel):
    model_config = ConfigDict(frozen=True)

    omega0: float               # splitting, > 0
    omega_d: float = 0.0        # drive amplitude, >= 0
    theta_d: float = 0.0        # tilt from the transverse axis, radians

    @model_validator(mode="after")
    def _check_ranges(self):
        if not (math.isfinite(self.omega0) and self.omega0 > 0.0):
            raise DomainError(f"omega0 must be positive and finite, got {self.omega0!r}")
        if not (math.isfinite(self.omega_d) and self.omega_d >= 0.0):
            raise DomainError(f"omega_d must be non-negative and finite, got {self.omega_d!r}")
        if not (0.0 <= self.theta_d < math.pi / 2):
            raise DomainError(f"theta_d must lie in [0, pi/2), got {self.theta_d!r}")
        return self

    @classmethod
    def from_degrees(cls, omega0: float, omega_d: float, theta_deg: float) -> "DriveSystem":
        return cls(omega0=omega0, omega_d=omega_d, theta_d=math.radians(theta_deg))

    @property
    def tan_theta(self) -> float:
        return _tan_theta(self.theta_d)

    def with_amplitude(self, omega_d: float) -> "DriveSystem":
        """Same splitting and tilt, different drive amplitude (re-validated)."""
        return DriveSystem(omega0=self.omega0, omega_d=omega_d, theta_d=self.theta_d)


class SpinState(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    amplitudes: np.ndarray      # (<up|psi>, <down|psi>)

    @field_validator("amplitudes", mode="before")
    @classmethod
    def _as_pair(cls, value):
        arr = np.array(value, dtype=complex)
        if arr.shape != (2,):
            raise ValueError(f"a spin state has exactly two amplitudes, got shape {arr.shape}")
        arr.flags.writeable = False
        return arr

    @model_validator(mode="after")
    def _check_norm(self):
        norm = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ContractError(f"spin state is not normalized (|psi|^2 = {norm!r})")
        return self

    @classmethod
    def up(cls) -> "SpinState":
        return cls(amplitudes=[1.0, 0.0])

    @classmethod
    def down(cls) -> "SpinState":
        return cls(amplitudes=[0.0, 1.0])

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


class Trajectory(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times: np.ndarray
    states: np.ndarray          # (samples, 2) complex amplitudes
    populations: np.ndarray     # (samples, 2) = (p_up, p_down)
    final_fidelity: float
    substeps: int = 0           # integration steps behind the final sample (0 for closed forms)
    refinement_delta: float = 0.0

    @model_validator(mode="after")
    def _check_invariants(self):
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ContractError("trajectory needs at least two samples")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0.0):
            raise ContractError("trajectory times must start at 0 and increase strictly")
        if self.states.shape != (len(self.times), 2) or self.populations.shape != self.states.shape:
            raise ContractError("states/populations do not match the time grid")
        drift = np.max(np.abs(self.populations.sum(axis=1) - 1.0))
        if drift > NORM_TOL:
            raise ContractError(f"populations drift from 1 by {drift:.3e}")
        if not 0.0 <= self.final_fidelity <= 1.0:
            raise ContractError(f"fidelity {self.final_fidelity!r} outside [0, 1]")
        for arr in (self.times, self.states, self.populations):
            arr.flags.writeable = False
        return self

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    def state_at(self, index: int) -> SpinState:
        return SpinState(amplitudes=self.states[index])


class PropagatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_step: float = Field(default=1.0 / 200.0, gt=0.0)           # fraction of the shortest period
    convergence_tol: float = Field(default=1e-9, gt=0.0)            # on successive final fidelities
    max_refinements: int = Field(default=14, ge=1)
    output_samples: int = Field(default=1000, ge=2)


# --- Hamiltonian ---

def _tan_theta(theta_d: float) -> float:
    if not 0.0 <= theta_d < math.pi / 2:
        raise DomainError(f"tilt angle {theta_d!r} is at or beyond pi/2")
    return math.tan(theta_d)


def exact_cancellation_amplitude(omega0: float, theta_d: float) -> float:
    """Drive amplitude at which f = -1 cancels the splitting: w0 / (2 tan theta_d)."""
    tan = _tan_theta(theta_d)
    if tan == 0.0:
        raise DomainError("an untilted drive has no cancellation amplitude")
    return omega0 / (2.0 * tan)


def shortest_period(system: DriveSystem) -> float:
    period = 2.0 * math.pi / system.omega0
    if system.omega_d > 0.0:
        period = min(period, 2.0 * math.pi / (system.omega_d * (1.0 + system.tan_theta)))
    return period


def dc_pi_duration(system: DriveSystem) -> float:
    """pi time of the constant f = -1 drive at cancellation, where H = -Wd sx."""
    if system.omega_d <= 0.0:
        raise DomainError("a pi pulse needs a nonzero drive amplitude")
    return math.pi / (2.0 * system.omega_d)


def _field_components(system: DriveSystem, f: np.ndarray):
    """Returns (hx, hz) of H = hx sx + hz sz for drive samples f."""
    hx = system.omega_d * f
    hz = 0.5 * system.omega0 + (system.omega_d * system.tan_theta) * f
    return hx, hz


def hamiltonian_at(system: DriveSystem, f_value: float) -> np.ndarray:
    if not math.isfinite(f_value):
        raise DomainError(f"drive value must be finite, got {f_value!r}")
    _tan_theta(system.theta_d)
    hx, hz = _field_components(system, float(f_value))
    return np.array([[hz, hx], [hx, -hz]], dtype=complex)


# --- SU(2) kernels ---

def _step_unitaries(hx: np.ndarray, hz: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i dt (hx sx + hz sz)) for each entry, closed form."""
    norm = np.hypot(hx, hz)
    phi = norm * dt
    c = np.cos(phi)
    s = dt * np.sinc(phi / np.pi)       # sin(phi) / |h|
    u = np.empty(np.shape(hx) + (2, 2), dtype=complex)
    u[..., 0, 0] = c - 1j * s * hz
    u[..., 1, 1] = c + 1j * s * hz
    u[..., 0, 1] = -1j * s * hx
    u[..., 1, 0] = -1j * s * hx
    return u


def _ordered_product(u: np.ndarray) -> np.ndarray:
    """Time-ordered product over axis -3 (index 0 acts first), by pairwise tree reduction."""
    while u.shape[-3] > 1:
        if u.shape[-3] % 2:
            pad = np.broadcast_to(IDENTITY, u.shape[:-3] + (1, 2, 2))
            u = np.concatenate([u, pad], axis=-3)
        u = u[..., 1::2, :, :] @ u[..., 0::2, :, :]
    return u[..., 0, :, :]


def _prefix_products(u: np.ndarray) -> np.ndarray:
    """P[k] = u[k] ... u[0], Hillis-Steele scan."""
    p = np.array(u, copy=True)
    shift = 1
    while shift < len(p):
        p[shift:] = p[shift:] @ p[:-shift]
        shift *= 2
    return p


def _product_over_steps(system: DriveSystem, waveform: Waveform, dt: float, first: int, count: int) -> np.ndarray:
    total = IDENTITY.copy()
    for start in range(first, first + count, _BLOCK_STEPS):
        stop = min(first + count, start + _BLOCK_STEPS)
        t = (np.arange(start, stop) + 0.5) * dt
        f = np.asarray(waveform.sample(t), dtype=float)
        total = _ordered_product(_step_unitaries(*_field_components(system, f), dt)) @ total
    return total


def _interval_unitaries(system: DriveSystem, waveform: Waveform, duration: float,
                        intervals: int, per_interval: int) -> np.ndarray:
    """One propagator per output interval, each built from per_interval midpoint substeps."""
    dt = duration / (intervals * per_interval)
    out = np.empty((intervals, 2, 2), dtype=complex)
    if per_interval > _BLOCK_STEPS:
        for j in range(intervals):
            out[j] = _product_over_steps(system, waveform, dt, j * per_interval, per_interval)
        return out
    block = max(1, _BLOCK_STEPS // per_interval)
    for start in range(0, intervals, block):
        stop = min(intervals, start + block)
        t = (np.arange(start * per_interval, stop * per_interval) + 0.5) * dt
        f = np.asarray(waveform.sample(t), dtype=float)
        steps = _step_unitaries(*_field_components(system, f), dt)
        out[start:stop] = _ordered_product(steps.reshape(stop - start, per_interval, 2, 2))
    return out


def _as_amplitudes(state0: Union[SpinState, np.ndarray, list]) -> np.ndarray:
    if isinstance(state0, SpinState):
        return np.array(state0.amplitudes)
    psi = np.asarray(state0, dtype=complex)
    if psi.shape != (2,):
        raise ContractError(f"initial state must have two amplitudes, got shape {psi.shape}")
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > NORM_TOL:
        raise ContractError(f"initial state is not normalized (|psi|^2 = {norm!r})")
    return psi


def _down_population(psi: np.ndarray) -> float:
    return min(1.0, float(abs(psi[-1]) ** 2))


# --- Propagation ---

def propagate(system: DriveSystem, waveform: Waveform, state0: Union[SpinState, np.ndarray],
              config: Optional[PropagatorConfig] = None) -> Trajectory:
    """
    Integrates i d|psi>/dt = H(t)|psi> over [0, waveform.duration].
    The substep is halved until two successive final fidelities agree within
    config.convergence_tol; output samples sit on a uniform grid independent of the substep.
    """
    config = config or PropagatorConfig()
    psi0 = _as_amplitudes(state0)
    duration = float(waveform.duration)
    if not (math.isfinite(duration) and duration > 0.0):
        raise ContractError(f"waveform duration must be positive, got {duration!r}")

    intervals = config.output_samples - 1
    natural = config.base_step * shortest_period(system)
    per_interval = max(1, math.ceil(duration / (natural * intervals)))

    history: List[float] = []
    for _ in range(config.max_refinements + 1):
        chunks = _interval_unitaries(system, waveform, duration, intervals, per_interval)
        history.append(_down_population(_ordered_product(chunks) @ psi0))
        if len(history) > 1 and abs(history[-1] - history[-2]) < config.convergence_tol:
            break
        per_interval *= 2
    else:
        log.warning(f"⚠️ Propagation did not converge after {config.max_refinements} refinements")
        raise ConvergenceError(
            f"no convergence within {config.max_refinements} step halvings", (history[-2], history[-1])
        )

    states = np.empty((intervals + 1, 2), dtype=complex)
    states[0] = psi0
    states[1:] = _prefix_products(chunks) @ psi0
    populations = np.abs(states) ** 2
    return Trajectory(
        times=np.linspace(0.0, duration, intervals + 1),
        states=states,
        populations=populations,
        final_fidelity=_down_population(states[-1]),
        substeps=intervals * per_interval,
        refinement_delta=abs(history[-1] - history[-2]),
    )


def evolve_fixed(system: DriveSystem, waveform: Waveform, state0: Union[SpinState, np.ndarray],
                 n_steps: int) -> np.ndarray:
    """Final amplitudes after exactly n_steps midpoint substeps, no refinement."""
    if n_steps < 1:
        raise ContractError("n_steps must be >= 1")
    psi0 = _as_amplitudes(state0)
    dt = float(waveform.duration) / n_steps
    return _product_over_steps(system, waveform, dt, 0, n_steps) @ psi0


def pulse_fidelity(trajectory: Trajectory) -> float:
    """|<psi(t_final)|down>|^2."""
    if len(trajectory.states) == 0:
        raise ContractError("empty trajectory")
    return _down_population(trajectory.states[-1])


def rwa_reference(system: DriveSystem, phase: float, duration: float,
                  state0: Union[SpinState, np.ndarray, None] = None, samples: int = 1000) -> Trajectory:
    """Closed-form rotating-frame evolution under H_I = (Wd/2)(sin(phi) sx - cos(phi) sy)."""
    if system.omega_d <= 0.0:
        raise DomainError("the RWA reference needs a nonzero drive amplitude")
    psi0 = _as_amplitudes(state0 if state0 is not None else SpinState.up())
    times = np.linspace(0.0, duration, samples)
    half = 0.5 * system.omega_d * times
    axis = math.sin(phase) * SIGMA_X - math.cos(phase) * SIGMA_Y
    u = np.cos(half)[:, None, None] * IDENTITY - 1j * np.sin(half)[:, None, None] * axis
    states = u @ psi0
    return Trajectory(
        times=times,
        states=states,
        populations=np.abs(states) ** 2,
        final_fidelity=_down_population(states[-1]),
    )


def bloch_vectors(trajectory: Trajectory) -> np.ndarray:
    """(samples, 3) Bloch vectors with +z = |up>."""
    up, down = trajectory.states[:, 0], trajectory.states[:, 1]
    coherence = np.conj(up) * down
    return np.column_stack([2.0 * coherence.real, 2.0 * coherence.imag, np.abs(up) ** 2 - np.abs(down) ** 2])
