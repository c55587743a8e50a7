"""
Optimal-control pi pulses.

Maximizes J = |<psi(t_pi)|down>|^2 - lambda * integral f^2 over piecewise-linear
controls with an adjoint (backward-propagated) gradient. Every iterate is kept
inside the constraint set: band-limited below the cutoff, zero value and zero
slope at both ends.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from scipy.optimize import least_squares

from spiraldrive.engine.errors import BracketError, ContractError, SpiralDriveError
from spiraldrive.engine.pulse_engine import (
    LANDSCAPE_PROPAGATOR,
    landscape,
    pi_duration,
    pulse_fidelity_for,
    pulse_spec,
    refine_optimum,
)
from spiraldrive.engine.spin_core import (
    DriveSystem,
    PropagatorConfig,
    SpinState,
    _field_components,
    _prefix_products,
    _step_unitaries,
    propagate,
)
from spiraldrive.engine.utils import TWO_PI, canonical_phase, map_ordered
from spiraldrive.engine.waveforms import (
    ControlWaveform,
    OffsetSinePulse,
    PulseSpec,
    constraint_projection,
    erf_envelope,
    spectral_leakage,
)

log = logging.getLogger(__name__)

CUTOFF_FACTOR = 10.7
DEFAULT_SUITE = (1 / 10, 1 / 6, 1 / 4, 1 / 3, 1 / 2, 1.0)
PEAK_WINDOW = (0.95, 1.10)
ENDPOINT_TOL = 1e-10

MAX_FAILED_SEARCHES = 10
LINE_SEARCH_HALVINGS = 30
GUESS_PHASES = 16

_UP = np.array([1.0, 0.0], dtype=complex)
_DOWN = np.array([0.0, 1.0], dtype=complex)


# --- Domain types ---

class OCTProblem(BaseModel):
    model_config = ConfigDict(frozen=True)

    system: DriveSystem
    t_pi: float
    spectral_cutoff: Optional[float] = None     # angular; None -> 10.7 w0
    energy_weight: float = 0.0
    max_iters: int = 300
    grad_tol: float = 1e-10                     # on the relative change of J
    samples_per_period: int = 256
    rise_time: Optional[float] = None           # initial-guess envelope; None -> pi / (10 w0)

    @model_validator(mode="after")
    def _check(self):
        if not (math.isfinite(self.t_pi) and self.t_pi > 0.0):
            raise ContractError(f"t_pi must be positive, got {self.t_pi!r}")
        if not self.cutoff > self.system.omega0:
            raise ContractError(f"spectral cutoff {self.cutoff:.6g} must exceed w0 = {self.system.omega0:.6g}")
        if self.energy_weight < 0.0:
            raise ContractError(f"energy weight must be >= 0, got {self.energy_weight!r}")
        if self.max_iters < 0 or self.samples_per_period < 16:
            raise ContractError("max_iters must be >= 0 and samples_per_period >= 16")
        return self

    @classmethod
    def for_system(cls, system: DriveSystem, **kwargs) -> "OCTProblem":
        """Problem with t_pi = pi / Wd + 2 dt for the default rise time."""
        rise_time = kwargs.get("rise_time") or math.pi / (10.0 * system.omega0)
        return cls(system=system, t_pi=pi_duration(system, rise_time), **kwargs)

    @property
    def cutoff(self) -> float:
        if self.spectral_cutoff is None:
            return CUTOFF_FACTOR * self.system.omega0
        return self.spectral_cutoff

    @property
    def intervals(self) -> int:
        return max(8, math.ceil(self.samples_per_period * self.t_pi * self.system.omega0 / TWO_PI))

    @property
    def dt(self) -> float:
        return self.t_pi / self.intervals

    def with_weight(self, energy_weight: float) -> "OCTProblem":
        return self.model_copy(update={"energy_weight": energy_weight})


class OCTResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    waveform: ControlWaveform
    fidelity: float                 # refined propagation of the returned waveform
    model_fidelity: float           # the optimizer's own piecewise model
    objective: float
    iterations: int
    converged: bool
    peak_amplitude: float           # units of Wd
    energy_weight: float
    history: List[Dict[str, float]] = []

    @model_validator(mode="after")
    def _check(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ContractError(f"fidelity {self.fidelity!r} outside [0, 1]")
        values = self.waveform.values
        if abs(values[0]) > ENDPOINT_TOL or abs(values[-1]) > ENDPOINT_TOL:
            raise ContractError("OCT waveform endpoints are not zero")
        return self


class OffsetSineFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    offset_a: float
    phase_phi: float
    amplitude_scale: Optional[float] = None
    residual_rms: float
    fit_fidelity: float
    spec: PulseSpec

    @model_validator(mode="after")
    def _check(self):
        if abs(self.offset_a) > 1.0 or self.residual_rms < 0.0:
            raise ContractError("fit needs |a| <= 1 and a non-negative residual")
        return self


class SuiteRow(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    omega_d: float
    t_pi: float = float("nan")
    cutoff: float = float("nan")
    oct_infidelity: float = float("nan")
    oct_fit_infidelity: float = float("nan")
    offset_sine_infidelity: float = float("nan")
    oct_peak: float = float("nan")
    oct_converged: bool = False
    oct_leakage: float = float("nan")
    fit_offset: float = float("nan")
    fit_phase: float = float("nan")
    fit_residual_rms: float = float("nan")
    opt_offset: float = float("nan")
    opt_phase: float = float("nan")
    status: str = "ok"
    errors: str = ""
    oct_waveform: Optional[ControlWaveform] = None
    fit_waveform: Optional[ControlWaveform] = None
    opt_waveform: Optional[ControlWaveform] = None
    oct_history: List[Dict[str, float]] = []


# --- Objective and adjoint gradient ---

def _step_derivatives(system: DriveSystem, hx: np.ndarray, hz: np.ndarray, dt: float) -> np.ndarray:
    """d/du of exp(-i dt (hx sx + hz sz)) with hx = Wd u, hz = w0/2 + Wd tan(theta) u."""
    dhx = system.omega_d
    dhz = system.omega_d * system.tan_theta
    norm = np.hypot(hx, hz)
    phi = norm * dt
    sin, cos = np.sin(phi), np.cos(phi)
    dnorm = (hx * dhx + hz * dhz) / norm
    dphi = dnorm * dt
    s = sin / norm
    dc = -sin * dphi
    ds = cos * dphi / norm - sin * dnorm / norm ** 2
    du = np.empty(np.shape(hx) + (2, 2), dtype=complex)
    du[..., 0, 0] = dc - 1j * (ds * hz + s * dhz)
    du[..., 1, 1] = dc + 1j * (ds * hz + s * dhz)
    du[..., 0, 1] = -1j * (ds * hx + s * dhx)
    du[..., 1, 0] = du[..., 0, 1]
    return du


def objective_and_gradient(problem: OCTProblem, values: np.ndarray) -> Tuple[float, float, np.ndarray]:
    """
    (J, F, dJ/dx) for control samples x on the problem grid (ends included).
    Interval j uses u_j = (x_j + x_{j+1}) / 2 as a constant drive.
    """
    x = np.asarray(values, dtype=float)
    m = len(x) - 1
    dt = problem.t_pi / m
    system = problem.system
    u = 0.5 * (x[:-1] + x[1:])
    hx, hz = _field_components(system, u)
    steps = _step_unitaries(hx, hz, dt)

    forward = _prefix_products(steps) @ _UP
    entering = np.vstack([_UP[None, :], forward[:-1]])
    amplitude = forward[-1][1]
    fidelity = min(1.0, float(abs(amplitude) ** 2))

    # costate rows <down| U_{m-1} ... U_{j+1}, via a scan over the reversed transposes
    suffix = _prefix_products(np.swapaxes(steps[::-1], -1, -2))
    costate = np.empty((m, 2), dtype=complex)
    costate[-1] = _DOWN
    costate[:-1] = (suffix[:-1] @ _DOWN)[::-1]

    du = _step_derivatives(system, hx, hz, dt)
    sensitivity = np.sum(costate * (du @ entering[..., None])[..., 0], axis=-1)
    grad_u = 2.0 * np.real(np.conj(amplitude) * sensitivity)

    grad = np.zeros(m + 1)
    grad[:-1] += 0.5 * grad_u
    grad[1:] += 0.5 * grad_u

    energy = float(np.trapezoid(x ** 2, dx=dt))
    energy_grad = 2.0 * dt * x
    energy_grad[0] *= 0.5
    energy_grad[-1] *= 0.5
    weight = problem.energy_weight
    return fidelity - weight * energy, fidelity, grad - weight * energy_grad


def _ascent_direction(problem: OCTProblem, grad: np.ndarray) -> np.ndarray:
    """Projected gradient in the periodic sample metric (the end sample folds onto the first)."""
    folded = np.array(grad, copy=True)
    folded[0] += folded[-1]
    folded[-1] = 0.0
    return constraint_projection(folded, problem.dt, problem.cutoff)


def initial_guess(problem: OCTProblem) -> np.ndarray:
    """Best-phase zero-offset erf sine from a coarse phase scan, projected into the constraint set."""
    system = problem.system
    rise_time = problem.rise_time or math.pi / (10.0 * system.omega0)
    envelope = "error-function" if problem.t_pi > 2.0 * rise_time else "rectangular"
    template = pulse_spec(system, rise_time=rise_time if envelope == "error-function" else 0.0,
                          envelope=envelope, duration=problem.t_pi)
    phases = np.linspace(0.0, TWO_PI, GUESS_PHASES, endpoint=False)
    scores = [pulse_fidelity_for(system, template.with_parameters(0.0, float(phi))) for phi in phases]
    best = template.with_parameters(0.0, float(phases[int(np.argmax(scores))]))
    times = np.linspace(0.0, problem.t_pi, problem.intervals + 1)
    return constraint_projection(OffsetSinePulse(best, system.omega0).sample(times), problem.dt, problem.cutoff)


# --- Solver ---

def solve(problem: OCTProblem, initial: Optional[np.ndarray] = None) -> OCTResult:
    """
    Projected gradient ascent with Barzilai-Borwein step guesses and monotone backtracking.
    Stops when the relative change of J drops below grad_tol, after max_iters,
    or after MAX_FAILED_SEARCHES consecutive failed line searches (converged = False).
    """
    x = initial_guess(problem) if initial is None else constraint_projection(
        np.asarray(initial, dtype=float), problem.dt, problem.cutoff
    )
    if len(x) != problem.intervals + 1:
        raise ContractError(f"initial control has {len(x)} samples, grid needs {problem.intervals + 1}")

    objective, fidelity, grad = objective_and_gradient(problem, x)
    direction = _ascent_direction(problem, grad)
    scale = float(np.max(np.abs(direction)))
    alpha = 0.1 / scale if scale > 0.0 else 0.0
    history = [{"iteration": 0, "objective": objective, "fidelity": fidelity,
                "peak_amplitude": float(np.max(np.abs(x))), "step": 0.0}]
    converged = False
    failures = 0
    iterations = 0

    for iteration in range(1, problem.max_iters + 1):
        if scale == 0.0:
            converged = True
            break
        iterations = iteration
        trial_alpha = alpha
        accepted = None
        for _ in range(LINE_SEARCH_HALVINGS):
            trial = constraint_projection(x + trial_alpha * direction, problem.dt, problem.cutoff)
            result = objective_and_gradient(problem, trial)
            if result[0] > objective:
                accepted = (trial, result)
                break
            trial_alpha *= 0.5

        if accepted is None:
            failures += 1
            alpha = trial_alpha * 1e-3
            if failures >= MAX_FAILED_SEARCHES:
                log.warning(f"⚠️ OCT: {failures} consecutive failed line searches, stopping")
                break
            continue
        failures = 0

        trial, (new_objective, fidelity, grad) = accepted
        new_direction = _ascent_direction(problem, grad)
        step = trial[:-1] - x[:-1]
        curvature = -float(step @ (new_direction[:-1] - direction[:-1]))
        alpha = float(step @ step) / curvature if curvature > 0.0 else 2.0 * trial_alpha

        change = (new_objective - objective) / max(abs(objective), 1e-300)
        x, objective, direction = trial, new_objective, new_direction
        scale = float(np.max(np.abs(direction)))
        history.append({"iteration": iteration, "objective": objective, "fidelity": fidelity,
                        "peak_amplitude": float(np.max(np.abs(x))), "step": trial_alpha})
        if change < problem.grad_tol:
            converged = True
            break

    waveform = ControlWaveform.uniform(problem.t_pi, x, unconstrained=True)
    refined = propagate(problem.system, waveform, SpinState.up(), LANDSCAPE_PROPAGATOR).final_fidelity
    log.info(f"✅ OCT: Wd/w0={problem.system.omega_d / problem.system.omega0:.4g}, "
             f"1-F={1.0 - refined:.3e} after {iterations} iterations (converged={converged})")
    return OCTResult(
        waveform=waveform,
        fidelity=refined,
        model_fidelity=fidelity,
        objective=objective,
        iterations=iterations,
        converged=converged,
        peak_amplitude=waveform.peak,
        energy_weight=problem.energy_weight,
        history=history,
    )


def autotune_energy_weight(problem: OCTProblem, window: Tuple[float, float] = PEAK_WINDOW,
                           max_bisections: int = 20, max_doublings: int = 40) -> float:
    """
    Energy weight whose solved waveform peaks inside `window` (units of Wd).
    Doubles from 1e-4 until the peak drops below the window, then bisects geometrically.
    """
    low_peak, high_peak = window

    def peak(weight: float) -> float:
        value = solve(problem.with_weight(weight)).peak_amplitude
        log.info(f"🔵 Autotune: lambda={weight:.4g} -> peak {value:.4f}")
        return value

    p = peak(0.0)
    if low_peak <= p <= high_peak:
        return 0.0
    if p < low_peak:
        raise BracketError("the unpenalized solve already peaks below the window", (0.0, 0.0))

    low, high = 0.0, 1e-4
    for _ in range(max_doublings):
        p = peak(high)
        if low_peak <= p <= high_peak:
            return high
        if p < low_peak:
            break
        low, high = high, 2.0 * high
    else:
        raise BracketError("no energy weight pushed the peak below the window", (low, high))

    for _ in range(max_bisections):
        mid = math.sqrt(low * high) if low > 0.0 else 0.5 * high
        p = peak(mid)
        if low_peak <= p <= high_peak:
            return mid
        if p > high_peak:
            low = mid
        else:
            high = mid
    raise BracketError(f"peak window not reached within {max_bisections} bisections", (low, high))


# --- Offset-sine fit ---

def fit_offset_sine(w: ControlWaveform, system: DriveSystem, spec_template: PulseSpec,
                    fit_amplitude: bool = False, config: Optional[PropagatorConfig] = None) -> OffsetSineFit:
    """
    Least-squares fit of eps(t) (a + (1 - |a|) sin(w0 t + phi)) to a sampled waveform,
    with the template's envelope; coarse (a, phi) grid first, then trust-region refinement.
    """
    template = spec_template
    if abs(template.duration_tpi - w.duration) > 1e-9 * w.duration:
        template = PulseSpec(offset_a=0.0, phase_phi=0.0, rise_time_dt=template.rise_time_dt,
                             duration_tpi=w.duration, envelope_kind=template.envelope_kind)
    times, target = w.times, w.values
    if template.envelope_kind == "error-function":
        envelope = erf_envelope(times, template.duration_tpi, template.rise_time_dt)
    else:
        envelope = np.ones_like(times)

    offsets = np.linspace(-1.0, 1.0, 41)
    phases = np.linspace(0.0, TWO_PI, 72, endpoint=False)
    best = (np.inf, 0.0, 0.0)
    for phi in phases:
        carrier = np.sin(system.omega0 * times + phi)
        model = envelope * (offsets[:, None] + (1.0 - np.abs(offsets))[:, None] * carrier)
        cost = np.sum((model - target) ** 2, axis=1)
        k = int(np.argmin(cost))
        if cost[k] < best[0]:
            best = (float(cost[k]), float(offsets[k]), float(phi))
    _, a0, phi0 = best

    def model_values(params):
        a, phi = params[0], params[1]
        scale = params[2] if fit_amplitude else 1.0
        return scale * envelope * (a + (1.0 - abs(a)) * np.sin(system.omega0 * times + phi))

    x0 = [a0, phi0]
    lower, upper = [-1.0, phi0 - math.pi], [1.0, phi0 + math.pi]
    if fit_amplitude:
        unit = model_values([a0, phi0, 1.0])
        norm = float(unit @ unit)
        x0.append(float(unit @ target) / norm if norm > 0.0 else 1.0)
        lower.append(0.0)
        upper.append(np.inf)
    solution = least_squares(lambda p: model_values(p) - target, x0, bounds=(lower, upper),
                             ftol=1e-14, xtol=1e-14, gtol=1e-14)

    a, phi = float(np.clip(solution.x[0], -1.0, 1.0)), canonical_phase(float(solution.x[1]))
    scale = float(solution.x[2]) if fit_amplitude else None
    residual_rms = float(np.sqrt(np.mean(solution.fun ** 2)))
    spec = template.with_parameters(a, phi)
    fitted_pulse = OffsetSinePulse(spec, system.omega0, scale if scale is not None else 1.0)
    fidelity = propagate(system, fitted_pulse, SpinState.up(), config or LANDSCAPE_PROPAGATOR).final_fidelity
    return OffsetSineFit(offset_a=a, phase_phi=phi, amplitude_scale=scale,
                         residual_rms=residual_rms, fit_fidelity=fidelity, spec=spec)


# --- Comparison suite ---

def _suite_row(system: DriveSystem, cutoff_factor: float, energy_weight: float, autotune: bool,
               max_iters: int, phase_n: int, offset_n: int, tol: float) -> SuiteRow:
    fields: Dict[str, object] = {"omega_d": system.omega_d}
    errors: List[str] = []
    template = pulse_spec(system)
    fields["t_pi"] = template.duration_tpi
    fields["cutoff"] = cutoff_factor * system.omega0
    oct_result = None
    try:
        problem = OCTProblem(system=system, t_pi=template.duration_tpi, spectral_cutoff=cutoff_factor * system.omega0,
                             energy_weight=energy_weight, max_iters=max_iters)
        if autotune:
            problem = problem.with_weight(autotune_energy_weight(problem))
        oct_result = solve(problem)
        fields.update(oct_infidelity=1.0 - oct_result.fidelity, oct_peak=oct_result.peak_amplitude,
                      oct_converged=oct_result.converged, oct_waveform=oct_result.waveform,
                      oct_history=oct_result.history,
                      oct_leakage=spectral_leakage(oct_result.waveform, problem.cutoff))
        fit = fit_offset_sine(oct_result.waveform, system, template)
        fit_times = oct_result.waveform.times
        fields.update(oct_fit_infidelity=1.0 - fit.fit_fidelity, fit_offset=fit.offset_a, fit_phase=fit.phase_phi,
                      fit_residual_rms=fit.residual_rms,
                      fit_waveform=ControlWaveform(times=fit_times,
                                                   values=OffsetSinePulse(fit.spec, system.omega0).sample(fit_times)))
    except (SpiralDriveError, ValidationError) as exc:
        log.error(f"❌ Suite row Wd={system.omega_d:.4g}: OCT stage failed: {exc}")
        errors.append(f"oct: {exc}")

    try:
        report = refine_optimum(landscape(system, phase_n, offset_n), tol)
        spec = template.with_parameters(report.best_offset, report.best_phase)
        samples = len(oct_result.waveform.times) if oct_result is not None else 1025
        opt_times = np.linspace(0.0, template.duration_tpi, samples)
        fields.update(offset_sine_infidelity=1.0 - report.best_fidelity, opt_offset=report.best_offset,
                      opt_phase=report.best_phase,
                      opt_waveform=ControlWaveform(times=opt_times,
                                                   values=OffsetSinePulse(spec, system.omega0).sample(opt_times)))
    except SpiralDriveError as exc:
        log.error(f"❌ Suite row Wd={system.omega_d:.4g}: offset-sine stage failed: {exc}")
        errors.append(f"offset-sine: {exc}")

    if errors:
        fields.update(status="failed", errors="; ".join(errors))
    return SuiteRow(**fields)


def compare_suite(amplitudes: Sequence[float], sys_base: DriveSystem, cutoff_factors: Optional[Sequence[float]] = None,
                  energy_weight: float = 0.0, autotune: bool = False, max_iters: int = 300,
                  phase_n: int = 24, offset_n: int = 21, tol: float = 1e-4,
                  workers: Optional[int] = None) -> List[SuiteRow]:
    """
    OCT, its offset-sine fit, and the landscape-optimized offset-sine for each amplitude
    (given as Wd values). A failing row is recorded and the suite continues.
    """
    amplitudes = list(amplitudes)
    if not amplitudes:
        raise ContractError("the amplitude suite is empty")
    factors = list(cutoff_factors) if cutoff_factors is not None else [CUTOFF_FACTOR] * len(amplitudes)
    if len(factors) != len(amplitudes):
        raise ContractError("cutoff_factors must match the amplitude list")

    def run(item: Tuple[float, float]) -> SuiteRow:
        omega_d, factor = item
        try:
            system = sys_base.with_amplitude(omega_d)
        except SpiralDriveError as exc:
            return SuiteRow(omega_d=omega_d, status="failed", errors=f"system: {exc}")
        return _suite_row(system, factor, energy_weight, autotune, max_iters, phase_n, offset_n, tol)

    rows = map_ordered(run, list(zip(amplitudes, factors)), workers)
    failed = sum(row.status != "ok" for row in rows)
    if failed:
        log.warning(f"⚠️ Suite finished with {failed} failed row(s) of {len(rows)}")
    return rows


def suite_table(rows: Sequence[SuiteRow]) -> pd.DataFrame:
    """Scalar columns of the suite as a DataFrame (waveforms left out)."""
    exclude = {"oct_waveform", "fit_waveform", "opt_waveform", "oct_history"}
    return pd.DataFrame([row.model_dump(exclude=exclude) for row in rows])
