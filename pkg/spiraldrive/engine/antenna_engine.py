"""
Static field of the two-layer planar spiral, per ampere.

Each layer is a stack of concentric circular filaments (one per turn, at mid-trace
radius), discretized into straight segments whose Biot-Savart field is summed in
closed form. Lengths are micrometres at the interface, SI internally; fields are G/A.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from spiraldrive.engine.errors import ContractError, DomainError, SingularityError
from spiraldrive.engine.utils import map_ordered

log = logging.getLogger(__name__)

MU0_OVER_4PI = 1e-3         # G m / A
MICRON = 1e-6
DEFAULT_SEGMENTS = 2048
MAP_SEGMENTS = 512
NV_TILT_DEG = 54.7

# Point-segment pairs evaluated per vectorized chunk.
_CHUNK_PAIRS = 2_000_000

Vector = Tuple[float, float, float]


# --- Domain types ---

class SpiralGeometry(BaseModel):
    model_config = ConfigDict(frozen=True)

    inner_diameter: float = 600.0   # um
    turns: int = 15
    trace_width: float = 100.0      # um
    turn_pitch: float = 200.0       # um, trace + gap
    layers: int = 2
    layer_gap: float = 20.0         # um, polyimide between layers
    aperture_diameter: float = 200.0
    sample_height: float = 50.0     # um above the top copper plane

    @model_validator(mode="after")
    def _check(self):
        lengths = {
            "inner_diameter": self.inner_diameter,
            "trace_width": self.trace_width,
            "turn_pitch": self.turn_pitch,
            "layer_gap": self.layer_gap,
            "aperture_diameter": self.aperture_diameter,
        }
        for name, value in lengths.items():
            if not (math.isfinite(value) and value > 0.0):
                raise DomainError(f"{name} must be positive, got {value!r}")
        if self.sample_height < 0.0:
            raise DomainError(f"sample_height must be >= 0, got {self.sample_height!r}")
        if self.turns < 1:
            raise DomainError(f"turns must be >= 1, got {self.turns}")
        if self.layers not in (1, 2):
            raise DomainError(f"layers must be 1 or 2, got {self.layers}")
        if self.turn_pitch < self.trace_width:
            raise DomainError(f"turn pitch {self.turn_pitch} < trace width {self.trace_width}: traces overlap")
        return self

    @property
    def radii(self) -> np.ndarray:
        """Filament radii in um."""
        return 0.5 * self.inner_diameter + (np.arange(self.turns) + 0.5) * self.turn_pitch

    @property
    def layer_heights(self) -> Tuple[float, ...]:
        """Copper plane heights in um; the top layer sits at z = 0."""
        return (0.0, -self.layer_gap)[: self.layers]

    @property
    def outer_radius(self) -> float:
        return float(self.radii[-1] + 0.5 * self.trace_width)

    @property
    def sample_point(self) -> Vector:
        return (0.0, 0.0, self.sample_height)


class FieldSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    position: Vector        # um
    b_per_current: Vector   # G/A

    @model_validator(mode="after")
    def _check(self):
        if not all(math.isfinite(c) for c in self.position + self.b_per_current):
            raise ContractError(f"non-finite field sample at {self.position}")
        return self

    @property
    def magnitude(self) -> float:
        return math.sqrt(sum(c * c for c in self.b_per_current))

    @property
    def tilt_deg(self) -> float:
        return field_tilt_deg(self)


class NVFrame(BaseModel):
    model_config = ConfigDict(frozen=True)

    nv_axis: Vector = (math.sin(math.radians(NV_TILT_DEG)), 0.0, math.cos(math.radians(NV_TILT_DEG)))

    @field_validator("nv_axis")
    @classmethod
    def _unit(cls, value: Vector) -> Vector:
        norm = math.sqrt(sum(c * c for c in value))
        if abs(norm - 1.0) > 1e-12:
            raise ContractError(f"nv_axis must be a unit vector (|n| = {norm!r})")
        return value

    @classmethod
    def tilted(cls, tilt_deg: float, azimuth_deg: float = 0.0) -> "NVFrame":
        """NV axis tilted from the spiral normal by tilt_deg, towards azimuth_deg."""
        t, p = math.radians(tilt_deg), math.radians(azimuth_deg)
        return cls(nv_axis=(math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)))


class NVProjection(BaseModel):
    model_config = ConfigDict(frozen=True)

    b_parallel: float       # G/A along the NV axis
    b_transverse: float     # G/A perpendicular to it
    theta_d: float          # radians, tilt from the transverse plane
    at_boundary: bool = False

    @property
    def theta_d_deg(self) -> float:
        return math.degrees(self.theta_d)


class CrossSection(BaseModel):
    """Rectangular map in the plane y = const, spanning x_range by z_range (um)."""
    model_config = ConfigDict(frozen=True)

    x_range: Tuple[float, float]
    z_range: Tuple[float, float]
    y: float = 0.0

    @classmethod
    def default_for(cls, geom: SpiralGeometry) -> "CrossSection":
        reach = 1.2 * geom.outer_radius
        return cls(x_range=(-reach, reach), z_range=(geom.sample_height, geom.sample_height + geom.outer_radius))


# --- Closed forms ---

def loop_center_field(radius_um: float) -> float:
    """|B|/I at the centre of one circular loop, G/A."""
    return 2.0 * math.pi * MU0_OVER_4PI / (radius_um * MICRON)


def loop_axis_field(radius_um: float, height_um: float) -> float:
    """|B|/I on the axis of one circular loop at height z, G/A."""
    r, z = radius_um * MICRON, height_um * MICRON
    return 2.0 * math.pi * MU0_OVER_4PI * r * r / (r * r + z * z) ** 1.5


# --- Biot-Savart ---

def _segments(geom: SpiralGeometry, segments_per_turn: int,
              layers: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Segment start points and vectors (metres), counter-clockwise seen from +z."""
    if segments_per_turn < 16:
        raise ContractError(f"segments_per_turn must be >= 16, got {segments_per_turn}")
    angles = np.linspace(0.0, 2.0 * math.pi, segments_per_turn, endpoint=False)
    ring = np.column_stack([np.cos(angles), np.sin(angles)])
    heights = geom.layer_heights
    chosen = range(len(heights)) if layers is None else layers
    starts, deltas = [], []
    for layer in chosen:
        for radius in geom.radii:
            vertices = np.column_stack([radius * ring, np.full(segments_per_turn, heights[layer])]) * MICRON
            starts.append(vertices)
            deltas.append(np.roll(vertices, -1, axis=0) - vertices)
    return np.vstack(starts), np.vstack(deltas)


def _check_clearance(geom: SpiralGeometry, points_um: np.ndarray) -> None:
    rho = np.hypot(points_um[:, 0], points_um[:, 1])
    for z_layer in geom.layer_heights:
        distance = np.hypot(rho[:, None] - geom.radii[None, :], points_um[:, 2:3] - z_layer)
        bad = np.nonzero(np.any(distance < 0.5 * geom.trace_width, axis=1))[0]
        if len(bad):
            point = tuple(float(c) for c in points_um[bad[0]])
            raise SingularityError(
                f"point {point} um lies within half a trace width of a conductor filament", point
            )


def _field_from_segments(points_m: np.ndarray, starts: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Exact straight-segment Biot-Savart sum, (P, 3) in G/A."""
    out = np.empty((len(points_m), 3))
    chunk = max(1, _CHUNK_PAIRS // len(starts))
    for lo in range(0, len(points_m), chunk):
        p = points_m[lo: lo + chunk, None, :]
        r1 = starts[None, :, :] - p
        r2 = r1 + deltas[None, :, :]
        n1 = np.linalg.norm(r1, axis=-1)
        n2 = np.linalg.norm(r2, axis=-1)
        factor = (n1 + n2) / (n1 * n2 * (n1 * n2 + np.sum(r1 * r2, axis=-1)))
        out[lo: lo + chunk] = MU0_OVER_4PI * np.einsum("pk,pkc->pc", factor, np.cross(r1, deltas[None, :, :]))
    return out


def _evaluate(geom: SpiralGeometry, points_um: np.ndarray, segments_per_turn: int,
              layers: Optional[Sequence[int]] = None) -> np.ndarray:
    points_um = np.atleast_2d(np.asarray(points_um, dtype=float))
    _check_clearance(geom, points_um)
    starts, deltas = _segments(geom, segments_per_turn, layers)
    return _field_from_segments(points_um * MICRON, starts, deltas)


def _sample(point, field) -> FieldSample:
    return FieldSample(position=tuple(float(c) for c in point), b_per_current=tuple(float(c) for c in field))


def biot_savart(geom: SpiralGeometry, point: Sequence[float], segments_per_turn: int = DEFAULT_SEGMENTS) -> FieldSample:
    """Field per ampere at `point` (um), both layers carrying the same co-directional current."""
    return _sample(point, _evaluate(geom, [point], segments_per_turn)[0])


def layer_field(geom: SpiralGeometry, point: Sequence[float], layer: int,
                segments_per_turn: int = DEFAULT_SEGMENTS) -> FieldSample:
    """Contribution of a single layer (0 = top)."""
    if not 0 <= layer < geom.layers:
        raise ContractError(f"layer {layer} out of range for a {geom.layers}-layer spiral")
    return _sample(point, _evaluate(geom, [point], segments_per_turn, layers=[layer])[0])


def field_map(geom: SpiralGeometry, plane: Optional[CrossSection] = None, resolution: Tuple[int, int] = (41, 21),
              segments_per_turn: int = MAP_SEGMENTS, workers: Optional[int] = None) -> List[FieldSample]:
    """Field over a cross-section grid, x fastest; points are split across workers and reassembled in order."""
    plane = plane or CrossSection.default_for(geom)
    nx, nz = resolution
    if nx < 1 or nz < 1:
        raise ContractError(f"resolution must be positive, got {resolution}")
    xs = np.linspace(plane.x_range[0], plane.x_range[1], nx)
    zs = np.linspace(plane.z_range[0], plane.z_range[1], nz)
    zz, xx = np.meshgrid(zs, xs, indexing="ij")
    points = np.column_stack([xx.ravel(), np.full(xx.size, plane.y), zz.ravel()])
    _check_clearance(geom, points)

    starts, deltas = _segments(geom, segments_per_turn)
    blocks = np.array_split(points, max(1, min(len(points), (workers or 1) * 4)))
    fields = map_ordered(lambda block: _field_from_segments(block * MICRON, starts, deltas), blocks, workers)
    log.info(f"✅ Field map: {nx} x {nz} points, {len(starts)} segments")
    return [_sample(p, b) for p, b in zip(points, np.vstack(fields))]


# --- Derived quantities ---

def field_tilt_deg(sample: FieldSample) -> float:
    """Angle between the field and the spiral normal, degrees."""
    bx, by, bz = sample.b_per_current
    return math.degrees(math.atan2(math.hypot(bx, by), abs(bz)))


def project_to_nv(sample: FieldSample, frame: Optional[NVFrame] = None) -> NVProjection:
    """Splits the field along / across the NV axis; theta_d = arctan(b_par / b_perp)."""
    frame = frame or NVFrame()
    b = np.asarray(sample.b_per_current)
    n = np.asarray(frame.nv_axis)
    magnitude = float(np.linalg.norm(b))
    if magnitude == 0.0:
        raise DomainError(f"zero field at {sample.position}: the drive tilt is undefined")
    parallel = float(b @ n)
    transverse = float(np.linalg.norm(b - parallel * n))
    if transverse <= 1e-12 * magnitude:
        return NVProjection(b_parallel=parallel, b_transverse=0.0,
                            theta_d=math.copysign(math.pi / 2, parallel), at_boundary=True)
    return NVProjection(b_parallel=parallel, b_transverse=transverse, theta_d=math.atan(parallel / transverse))


def aperture_uniformity(geom: SpiralGeometry, samples: int = 11, segments_per_turn: int = DEFAULT_SEGMENTS) -> float:
    """(max - min) / mean of |B| across the optical aperture at sample height."""
    half = 0.5 * geom.aperture_diameter
    points = np.column_stack([np.linspace(-half, half, samples), np.zeros(samples), np.full(samples, geom.sample_height)])
    magnitudes = np.linalg.norm(_evaluate(geom, points, segments_per_turn), axis=1)
    return float((magnitudes.max() - magnitudes.min()) / magnitudes.mean())
