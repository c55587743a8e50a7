"""
Offset-sine pi-pulse optimization: fidelity landscapes over (phi_d, a),
compass-search refinement, and the driving-strength sweep.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from spiraldrive.engine.errors import ContractError, DomainError, LandscapeError, SpiralDriveError
from spiraldrive.engine.spin_core import DriveSystem, PropagatorConfig, SpinState, Trajectory, propagate
from spiraldrive.engine.utils import TWO_PI, canonical_phase, map_ordered
from spiraldrive.engine.waveforms import EnvelopeKind, OffsetSinePulse, PulseSpec, default_rise_time

log = logging.getLogger(__name__)

DEFAULT_PHASES = 64
DEFAULT_OFFSETS = 41
DOMINANCE_SLACK = 1e-12

# Landscapes only need the final state and a slightly looser refinement stop.
LANDSCAPE_PROPAGATOR = PropagatorConfig(convergence_tol=1e-8, output_samples=2)


# --- Domain types ---

class LandscapeGrid(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    phases: np.ndarray
    offsets: np.ndarray
    infidelity: np.ndarray          # shape (len(offsets), len(phases))
    system: DriveSystem
    spec_template: PulseSpec
    config: PropagatorConfig

    @model_validator(mode="after")
    def _check(self):
        if self.infidelity.shape != (len(self.offsets), len(self.phases)):
            raise ContractError(
                f"infidelity shape {self.infidelity.shape} != ({len(self.offsets)}, {len(self.phases)})"
            )
        if np.any(self.infidelity < 0.0) or np.any(self.infidelity > 1.0):
            raise ContractError("infidelity values must lie in [0, 1]")
        for arr in (self.phases, self.offsets, self.infidelity):
            arr.flags.writeable = False
        return self

    @property
    def fidelity(self) -> np.ndarray:
        return 1.0 - self.infidelity

    def best_cell(self) -> Tuple[int, int]:
        """Lowest infidelity; ties go to the smallest (offset index, phase index)."""
        flat = int(np.argmin(self.infidelity))
        return flat // len(self.phases), flat % len(self.phases)


class OptimumReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    best_phase: float
    best_offset: float
    best_fidelity: float
    zero_offset_best_phase: float
    zero_offset_best_fidelity: float
    zero_offset_worst_phase: float
    zero_offset_worst_fidelity: float
    evaluations: int = 0

    @model_validator(mode="after")
    def _check_dominance(self):
        if self.best_fidelity < self.zero_offset_best_fidelity - DOMINANCE_SLACK:
            raise ContractError(
                f"joint optimum {self.best_fidelity!r} below the phase-only optimum {self.zero_offset_best_fidelity!r}"
            )
        return self


# --- Pulse timing ---

def pi_duration(system: DriveSystem, rise_time: float) -> float:
    """t_pi = pi / Wd + 2 dt (the envelope edges eat into the rotation)."""
    if system.omega_d <= 0.0:
        raise DomainError("a pi pulse needs a nonzero drive amplitude")
    return math.pi / system.omega_d + 2.0 * rise_time


def pulse_spec(system: DriveSystem, offset: float = 0.0, phase: float = 0.0,
               rise_time: Optional[float] = None, envelope: EnvelopeKind = "error-function",
               duration: Optional[float] = None) -> PulseSpec:
    """PulseSpec for `system` with the default rise time and t_pi unless overridden."""
    if rise_time is None:
        rise_time = default_rise_time(system.omega0) if envelope == "error-function" else 0.0
    if duration is None:
        duration = pi_duration(system, rise_time)
    return PulseSpec(offset_a=offset, phase_phi=phase, rise_time_dt=rise_time,
                     duration_tpi=duration, envelope_kind=envelope)


def simulate_pulse(system: DriveSystem, spec: PulseSpec, config: Optional[PropagatorConfig] = None) -> Trajectory:
    return propagate(system, OffsetSinePulse(spec, system.omega0), SpinState.up(), config)


def pulse_fidelity_for(system: DriveSystem, spec: PulseSpec, config: Optional[PropagatorConfig] = None) -> float:
    return simulate_pulse(system, spec, config or LANDSCAPE_PROPAGATOR).final_fidelity


# --- Landscapes ---

def landscape(system: DriveSystem, phase_n: int = DEFAULT_PHASES, offset_n: int = DEFAULT_OFFSETS,
              config: Optional[PropagatorConfig] = None, rise_time: Optional[float] = None,
              envelope: EnvelopeKind = "error-function", duration: Optional[float] = None,
              workers: Optional[int] = None) -> LandscapeGrid:
    """
    1 - F for every (offset, phase) cell, propagating |up> under the offset-sine pulse.
    Cells may run on a thread pool; assembly follows row-major cell order.
    """
    if phase_n < 2 or offset_n < 2:
        raise ContractError(f"landscape grids need >= 2 points per axis, got {offset_n} x {phase_n}")
    config = config or LANDSCAPE_PROPAGATOR
    template = pulse_spec(system, rise_time=rise_time, envelope=envelope, duration=duration)
    phases = np.linspace(0.0, TWO_PI, phase_n, endpoint=False)
    offsets = np.linspace(-1.0, 1.0, offset_n)
    cells = [(i, j) for i in range(offset_n) for j in range(phase_n)]

    def evaluate(cell: Tuple[int, int]) -> float:
        i, j = cell
        a, phi = float(offsets[i]), float(phases[j])
        try:
            return 1.0 - pulse_fidelity_for(system, template.with_parameters(a, phi), config)
        except SpiralDriveError as exc:
            log.error(f"❌ Landscape cell ({i}, {j}) failed: {exc}")
            raise LandscapeError(str(exc), cell, (a, phi)) from exc

    log.info(f"🔵 Landscape: Wd/w0={system.omega_d / system.omega0:.4g}, {offset_n} offsets x {phase_n} phases")
    values = map_ordered(evaluate, cells, workers)
    infidelity = np.clip(np.array(values).reshape(offset_n, phase_n), 0.0, 1.0)
    return LandscapeGrid(phases=phases, offsets=offsets, infidelity=infidelity,
                         system=system, spec_template=template, config=config)


def phase_scan(system: DriveSystem, phases: Sequence[float], offset: float = 0.0,
               config: Optional[PropagatorConfig] = None, rise_time: Optional[float] = None,
               envelope: EnvelopeKind = "error-function", duration: Optional[float] = None,
               workers: Optional[int] = None) -> np.ndarray:
    """Fidelity versus phase at a fixed offset."""
    template = pulse_spec(system, offset=offset, rise_time=rise_time, envelope=envelope, duration=duration)
    return np.array(map_ordered(
        lambda phi: pulse_fidelity_for(system, template.with_parameters(offset, float(phi)), config),
        list(phases), workers,
    ))


# --- Refinement ---

class _Objective:
    """Memoized fidelity over (offset, phase) for one grid's system and template."""

    def __init__(self, grid: LandscapeGrid):
        self.grid = grid
        self.cache: Dict[Tuple[float, float], float] = {}
        for i, a in enumerate(grid.offsets):
            for j, phi in enumerate(grid.phases):
                self.cache[(float(a), canonical_phase(float(phi)))] = 1.0 - float(grid.infidelity[i, j])

    def __call__(self, offset: float, phase: float) -> float:
        key = (min(1.0, max(-1.0, offset)), canonical_phase(phase))
        if key not in self.cache:
            spec = self.grid.spec_template.with_parameters(*key)
            self.cache[key] = pulse_fidelity_for(self.grid.system, spec, self.grid.config)
        return self.cache[key]


def _compass(objective, start: Tuple[float, float], steps: Tuple[float, float], tol: float,
             sign: float = 1.0, axes: Tuple[int, ...] = (0, 1)) -> Tuple[Tuple[float, float], float]:
    """
    Compass search over (offset, phase), maximizing sign * F.
    Moves only on strict improvement; halves the steps when no poll improves.
    """
    point = start
    value = objective(*point)
    steps = list(steps)
    while max(steps[k] for k in axes) >= tol:
        moved = False
        for k in axes:
            for direction in (1.0, -1.0):
                trial = list(point)
                trial[k] += direction * steps[k]
                trial[0] = min(1.0, max(-1.0, trial[0]))
                trial[1] = canonical_phase(trial[1])
                trial = tuple(trial)
                if trial == point:
                    continue
                candidate = objective(*trial)
                if sign * candidate > sign * value:
                    point, value, moved = trial, candidate, True
                    break
            if moved:
                break
        if not moved:
            steps = [s * 0.5 for s in steps]
    return point, value


def refine_optimum(grid: LandscapeGrid, tol: float = 1e-4) -> OptimumReport:
    """
    Refines the best grid cell by compass search and reports the a = 0 phase extremes.
    The joint optimum is never reported below the phase-only optimum.
    """
    if not tol > 0.0:
        raise ContractError(f"tol must be positive, got {tol!r}")
    objective = _Objective(grid)
    phase_step = TWO_PI / len(grid.phases)
    offset_step = 2.0 / (len(grid.offsets) - 1)

    i, j = grid.best_cell()
    (best_a, best_phi), best_f = _compass(
        objective, (float(grid.offsets[i]), float(grid.phases[j])), (offset_step, phase_step), tol
    )

    zero_row = np.array([objective(0.0, float(phi)) for phi in grid.phases])
    hi, lo = int(np.argmax(zero_row)), int(np.argmin(zero_row))
    (_, zero_best_phi), zero_best_f = _compass(
        objective, (0.0, float(grid.phases[hi])), (offset_step, phase_step), tol, axes=(1,)
    )
    (_, zero_worst_phi), zero_worst_f = _compass(
        objective, (0.0, float(grid.phases[lo])), (offset_step, phase_step), tol, sign=-1.0, axes=(1,)
    )

    if zero_best_f > best_f:
        # the a = 0 line is part of the joint search space
        best_a, best_phi, best_f = 0.0, zero_best_phi, zero_best_f

    log.info(f"✅ Optimum: a={best_a:.5f}, phi={best_phi:.5f}, 1-F={1.0 - best_f:.3e}")
    return OptimumReport(
        best_phase=best_phi,
        best_offset=best_a,
        best_fidelity=best_f,
        zero_offset_best_phase=zero_best_phi,
        zero_offset_best_fidelity=zero_best_f,
        zero_offset_worst_phase=zero_worst_phi,
        zero_offset_worst_fidelity=zero_worst_f,
        evaluations=len(objective.cache),
    )


def evolution_family(grid: LandscapeGrid, report: OptimumReport,
                     config: Optional[PropagatorConfig] = None) -> Dict[str, Trajectory]:
    """Trajectories for the a = 0 best and worst phases and the joint optimum."""
    config = config or PropagatorConfig()
    template = grid.spec_template
    picks = {
        "zero_offset_best": (0.0, report.zero_offset_best_phase),
        "zero_offset_worst": (0.0, report.zero_offset_worst_phase),
        "joint_optimum": (report.best_offset, report.best_phase),
    }
    return {name: simulate_pulse(grid.system, template.with_parameters(a, phi), config)
            for name, (a, phi) in picks.items()}


def strength_sweep(system: DriveSystem, amplitudes: Sequence[float], phase_n: int = DEFAULT_PHASES,
                   offset_n: int = DEFAULT_OFFSETS, config: Optional[PropagatorConfig] = None,
                   tol: float = 1e-4, workers: Optional[int] = None) -> List[Tuple[LandscapeGrid, OptimumReport]]:
    """Landscape plus refined optimum for each drive amplitude."""
    results = []
    for omega_d in amplitudes:
        grid = landscape(system.with_amplitude(omega_d), phase_n, offset_n, config, workers=workers)
        results.append((grid, refine_optimum(grid, tol)))
    return results


def tilt_comparison(sys_tilted: DriveSystem, sys_flat: DriveSystem, config: Optional[PropagatorConfig] = None,
                    phase_n: int = DEFAULT_PHASES, offset_n: int = DEFAULT_OFFSETS, tol: float = 1e-4,
                    workers: Optional[int] = None) -> Tuple[OptimumReport, OptimumReport]:
    if sys_tilted.omega0 != sys_flat.omega0 or sys_tilted.omega_d != sys_flat.omega_d:
        raise ContractError("tilt comparison needs systems with equal omega0 and omega_d")
    if sys_flat.theta_d != 0.0:
        raise ContractError(f"the flat system must have theta_d = 0, got {sys_flat.theta_d!r}")
    reports = []
    for system in (sys_tilted, sys_flat):
        grid = landscape(system, phase_n, offset_n, config, workers=workers)
        reports.append(refine_optimum(grid, tol))
    return reports[0], reports[1]
