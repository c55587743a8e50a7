"""
NV ground-state ODMR model and the current-series fit.

H = D Sz^2 + E (Sx^2 - Sy^2) + gamma_e B.S (MHz), B = (B/I) * I * field_dir in the NV frame.
"""
import logging
import math
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.linalg import eigh
from scipy.optimize import least_squares

from spiraldrive.engine.errors import ContractError, DomainError, FitError

log = logging.getLogger(__name__)

_R2 = 1.0 / math.sqrt(2.0)
SPIN1_X = np.array([[0, _R2, 0], [_R2, 0, _R2], [0, _R2, 0]], dtype=complex)
SPIN1_Y = np.array([[0, -1j * _R2, 0], [1j * _R2, 0, -1j * _R2], [0, 1j * _R2, 0]], dtype=complex)
SPIN1_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)

OdmrPoint = Tuple[float, float, float]      # (current A, f_minus MHz, f_plus MHz)


class NVModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    zero_field_splitting_D: float = 2870.0      # MHz
    strain_E: float = 0.0                       # MHz
    gyro_e: float = 2.8025                      # MHz/G
    field_dir: Tuple[float, float, float] = (0.0, 0.0, 1.0)
    field_per_current: float = 0.0              # G/A

    @model_validator(mode="after")
    def _check(self):
        if not self.zero_field_splitting_D > 0.0:
            raise DomainError(f"D must be positive, got {self.zero_field_splitting_D!r}")
        if not self.gyro_e > 0.0:
            raise DomainError(f"gyro_e must be positive, got {self.gyro_e!r}")
        norm = math.sqrt(sum(c * c for c in self.field_dir))
        if abs(norm - 1.0) > 1e-9:
            raise ContractError(f"field_dir must be a unit vector (|d| = {norm!r})")
        return self

    @classmethod
    def tilted(cls, field_per_current: float, tilt: float, strain_E: float = 0.0, **kwargs) -> "NVModel":
        """Field in the NV x-z plane, `tilt` radians out of the transverse plane."""
        return cls(field_per_current=field_per_current, strain_E=strain_E,
                   field_dir=(math.cos(tilt), 0.0, math.sin(tilt)), **kwargs)

    @property
    def tilt(self) -> float:
        x, y, z = self.field_dir
        return math.atan2(z, math.hypot(x, y))


def spin_hamiltonian(model: NVModel, current: float) -> np.ndarray:
    bx, by, bz = (model.field_per_current * current * c for c in model.field_dir)
    zeeman = model.gyro_e * (bx * SPIN1_X + by * SPIN1_Y + bz * SPIN1_Z)
    return (model.zero_field_splitting_D * SPIN1_Z @ SPIN1_Z
            + model.strain_E * (SPIN1_X @ SPIN1_X - SPIN1_Y @ SPIN1_Y)
            + zeeman)


def odmr_transitions(model: NVModel, current: float) -> Tuple[float, float]:
    """Transitions from the lowest level to the upper pair, ascending, MHz."""
    levels = eigh(spin_hamiltonian(model, current), eigvals_only=True)
    return float(levels[1] - levels[0]), float(levels[2] - levels[0])


class OdmrFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: NVModel
    field_per_current: float
    field_per_current_stderr: float
    tilt_deg: float
    tilt_deg_stderr: float
    strain_E: float
    strain_E_stderr: float
    residual_rms: float         # MHz
    points: int


def fit_odmr_series(data: Sequence[OdmrPoint], init: NVModel) -> OdmrFit:
    """
    Least squares over (B/I, tilt, E) with D and gamma_e fixed at `init`.
    Standard errors come from s^2 (J^T J)^-1 at the solution.
    """
    table = np.asarray(data, dtype=float)
    if table.ndim != 2 or table.shape[1] != 3:
        raise ContractError("ODMR data must be rows of (current, f_minus, f_plus)")
    if len(table) < 4:
        raise FitError(f"need >= 4 ODMR points, got {len(table)}")
    if len(np.unique(table[:, 0])) < 2:
        raise FitError("all ODMR points share one current; the field ratio is not identifiable")

    currents, measured = table[:, 0], table[:, 1:].ravel()

    def build(params) -> NVModel:
        return NVModel.tilted(params[0], params[1], params[2],
                              zero_field_splitting_D=init.zero_field_splitting_D, gyro_e=init.gyro_e)

    def residuals(params) -> np.ndarray:
        model = build(params)
        return np.array([odmr_transitions(model, i) for i in currents]).ravel() - measured

    x0 = [max(init.field_per_current, 0.0), min(max(init.tilt, 0.0), math.pi / 2), max(init.strain_E, 0.0)]
    solution = least_squares(residuals, x0, bounds=([0.0, 0.0, 0.0], [np.inf, math.pi / 2, np.inf]),
                             x_scale="jac", ftol=1e-12, xtol=1e-12, gtol=1e-12)
    if not solution.success:
        raise FitError(f"ODMR fit did not converge: {solution.message}")

    dof = len(measured) - len(solution.x)
    variance = 2.0 * solution.cost / dof if dof > 0 else float("nan")
    try:
        covariance = variance * np.linalg.inv(solution.jac.T @ solution.jac)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"degenerate ODMR fit, curvature matrix is singular: {exc}") from exc
    stderr = np.sqrt(np.abs(np.diag(covariance)))

    model = build(solution.x)
    rms = float(np.sqrt(np.mean(solution.fun ** 2)))
    log.info(f"✅ ODMR fit: B/I={solution.x[0]:.3f} G/A, tilt={math.degrees(solution.x[1]):.2f} deg, "
             f"E={solution.x[2]:.3f} MHz (rms {rms:.3g} MHz)")
    return OdmrFit(
        model=model,
        field_per_current=float(solution.x[0]),
        field_per_current_stderr=float(stderr[0]),
        tilt_deg=math.degrees(solution.x[1]),
        tilt_deg_stderr=math.degrees(stderr[1]),
        strain_E=float(solution.x[2]),
        strain_E_stderr=float(stderr[2]),
        residual_rms=rms,
        points=len(table),
    )
