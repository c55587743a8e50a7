import json
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import toml
from pydantic import BaseModel, ConfigDict, Field

from spiraldrive.engine.antenna_engine import MAP_SEGMENTS, DEFAULT_SEGMENTS, NV_TILT_DEG, NVFrame, SpiralGeometry
from spiraldrive.engine.analysis.odmr_engine import NVModel
from spiraldrive.engine.errors import ParseError
from spiraldrive.engine.oct_engine import CUTOFF_FACTOR, DEFAULT_SUITE
from spiraldrive.engine.pulse_engine import DEFAULT_OFFSETS, DEFAULT_PHASES, pulse_spec
from spiraldrive.engine.spin_core import DriveSystem, PropagatorConfig, dc_pi_duration, exact_cancellation_amplitude
from spiraldrive.engine.waveforms import EnvelopeKind, PulseSpec


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(Section):
    out_dir: str = "out"
    seed: int = 0
    threads: int = Field(default=1, ge=1)


class SystemSection(Section):
    omega0: float = 1.0
    omega_d: Union[float, Literal["exact-cancellation"]] = 1.0     # fraction of omega0
    theta_d_deg: float = 35.3

    def build(self, omega_d: Optional[float] = None) -> DriveSystem:
        theta = math.radians(self.theta_d_deg)
        if omega_d is None and self.omega_d == "exact-cancellation":
            return DriveSystem(omega0=self.omega0, omega_d=exact_cancellation_amplitude(self.omega0, theta),
                               theta_d=theta)
        fraction = self.omega_d if omega_d is None else omega_d
        return DriveSystem(omega0=self.omega0, omega_d=fraction * self.omega0, theta_d=theta)


class PulseSection(Section):
    offset: float = 0.0
    phase: float = 0.0                              # radians
    rise_time: Optional[float] = None               # 1/omega0 units; None -> pi / (10 omega0)
    envelope: EnvelopeKind = "error-function"
    duration: Union[float, Literal["pi", "dc-pi"]] = "pi"

    def duration_for(self, system: DriveSystem) -> Optional[float]:
        """Explicit pulse length, or None for t_pi = pi / Wd + 2 dt."""
        if self.duration == "pi":
            return None
        if self.duration == "dc-pi":
            return dc_pi_duration(system)
        return float(self.duration)

    def build(self, system: DriveSystem) -> PulseSpec:
        return pulse_spec(system, offset=self.offset, phase=self.phase, rise_time=self.rise_time,
                          envelope=self.envelope, duration=self.duration_for(system))


class LandscapeSection(Section):
    amplitudes: Optional[List[float]] = None        # fractions of omega0; None -> [system] omega_d
    phase_n: int = DEFAULT_PHASES
    offset_n: int = DEFAULT_OFFSETS
    tol: float = 1e-4
    gnuplot: bool = True
    trajectories: bool = False                      # best / worst / joint-optimum evolutions
    compare_flat: bool = False                      # also optimize the untilted drive


class OctSection(Section):
    amplitudes: List[float] = Field(default_factory=lambda: list(DEFAULT_SUITE))
    cutoff_factor: float = CUTOFF_FACTOR
    cutoff_factors: Optional[List[float]] = None    # per amplitude, overrides cutoff_factor
    energy_weight: float = 0.0                      # 0 keeps F; peaks may reach ~1.6 Wd at Wd = w0
    autotune: bool = False                          # tune the weight until the peak is 0.95-1.10 Wd, at a cost in F
    max_iters: int = 300
    phase_n: int = 24
    offset_n: int = 21
    tol: float = 1e-4
    history: bool = True

    def factors(self) -> List[float]:
        return list(self.cutoff_factors) if self.cutoff_factors is not None else [self.cutoff_factor] * len(self.amplitudes)


class SpiralSection(Section):
    inner_diameter: float = 600.0
    turns: int = 15
    trace_width: float = 100.0
    turn_pitch: float = 200.0
    layers: int = 2
    layer_gap: float = 20.0
    aperture_diameter: float = 200.0
    sample_height: float = 50.0
    nv_tilt_deg: float = NV_TILT_DEG
    segments_per_turn: int = DEFAULT_SEGMENTS
    map_segments: int = MAP_SEGMENTS
    resolution: Tuple[int, int] = (41, 21)
    field_map: bool = True

    def geometry(self) -> SpiralGeometry:
        return SpiralGeometry(**self.model_dump(include=set(SpiralGeometry.model_fields)))

    def frame(self) -> NVFrame:
        return NVFrame.tilted(self.nv_tilt_deg)


class FitSection(Section):
    odmr_csv: Optional[str] = None
    rabi_csvs: List[str] = []
    species: str = "proton"
    gamma: Optional[float] = None                   # MHz/G, species = "custom"
    zero_field_splitting_D: float = 2870.0
    gyro_e: float = 2.8025
    init_field_per_current: float = 100.0           # G/A
    init_tilt_deg: float = 30.0
    init_strain_E: float = 3.0                      # MHz
    b0_gauss: Optional[float] = None                # bias field for the Larmor / drive-ratio report

    def init_model(self) -> NVModel:
        return NVModel.tilted(self.init_field_per_current, math.radians(self.init_tilt_deg), self.init_strain_E,
                              zero_field_splitting_D=self.zero_field_splitting_D, gyro_e=self.gyro_e)


class RunConfig(Section):
    run: RunSection = RunSection()
    system: SystemSection = SystemSection()
    pulse: PulseSection = PulseSection()
    propagator: PropagatorConfig = PropagatorConfig()
    landscape: LandscapeSection = LandscapeSection()
    oct: OctSection = OctSection()
    spiral: SpiralSection = SpiralSection()
    fit: FitSection = FitSection()


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Raw TOML (or JSON, by suffix) config; decode errors become line-numbered ParseErrors."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config: {exc}", path=str(path)) from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from exc
    try:
        return toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from exc


def load_run_config(path: Optional[Union[str, Path]]) -> Tuple[RunConfig, Dict[str, Any]]:
    """Validated RunConfig plus the raw mapping it came from (hashed into provenance)."""
    raw = read_config_file(path) if path is not None else {}
    return RunConfig.model_validate(raw), raw
