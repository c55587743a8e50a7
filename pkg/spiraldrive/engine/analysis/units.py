"""Field / frequency conversions used by the experimental analysis (G, A, MHz, kHz)."""
import math
from typing import Optional

from spiraldrive.engine.errors import DomainError

# gamma / 2pi in MHz per gauss
GYRO_MHZ_PER_G = {
    "proton": 4.2577e-3,
    "electron": 2.8025,
}


def gyromagnetic_ratio(species: str = "proton", gamma: Optional[float] = None) -> float:
    """gamma / 2pi in MHz/G; `species="custom"` takes `gamma` as given."""
    if species == "custom":
        if gamma is None or not gamma > 0.0:
            raise DomainError(f"custom species needs a positive gamma, got {gamma!r}")
        return gamma
    if species not in GYRO_MHZ_PER_G:
        raise DomainError(f"unknown species {species!r}; use one of {sorted(GYRO_MHZ_PER_G)} or 'custom'")
    return GYRO_MHZ_PER_G[species]


def larmor_frequency(b0_gauss: float, species: str = "proton", gamma: Optional[float] = None) -> float:
    """gamma / 2pi * B0, MHz."""
    if not b0_gauss >= 0.0:
        raise DomainError(f"B0 must be >= 0, got {b0_gauss!r}")
    return gyromagnetic_ratio(species, gamma) * b0_gauss


def rabi_to_field(slope_khz_per_a: float, species: str = "proton", gamma: Optional[float] = None) -> float:
    """
    B1 / I in G/A from the Rabi-frequency slope, with Wd = (gamma / 2pi) B1.
    463 kHz/A on protons gives 108.8 G/A.
    """
    if not slope_khz_per_a > 0.0:
        raise DomainError(f"slope must be positive, got {slope_khz_per_a!r}")
    return slope_khz_per_a / (1e3 * gyromagnetic_ratio(species, gamma))


def field_to_rabi(b_per_current: float, species: str = "proton", gamma: Optional[float] = None) -> float:
    """Inverse of rabi_to_field: kHz/A."""
    return b_per_current * 1e3 * gyromagnetic_ratio(species, gamma)


def transverse_field_ratio(b_per_current: float, theta_d: float) -> float:
    """B cos(theta_d) / I, the part of the field that drives the spins."""
    return b_per_current * math.cos(theta_d)


def drive_to_splitting_ratio(rabi_khz: float, larmor_mhz: float) -> float:
    """Wd / w0 from a measured Rabi frequency and Larmor frequency."""
    if not larmor_mhz > 0.0:
        raise DomainError(f"Larmor frequency must be positive, got {larmor_mhz!r}")
    return rabi_khz * 1e-3 / larmor_mhz
