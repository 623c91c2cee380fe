"""Square uniform planar array geometry and far-field steering vectors.

The array lies in the y-z plane with broadside along +x.  Element ``(m, n)``
sits at ``(0, m*d, n*d)`` and elements are ordered row-major over ``(m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayConfig:
    antennas_per_side: int
    carrier_frequency: float
    element_spacing: Optional[float] = None  # None -> half wavelength

    def __post_init__(self):
        if int(self.antennas_per_side) != self.antennas_per_side or self.antennas_per_side < 1:
            raise ValueError("antennas_per_side must be a positive integer")
        if not self.carrier_frequency > 0:
            raise ValueError("carrier_frequency must be positive")
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.wavelength / 2)
        elif not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")

    @property
    def num_antennas(self) -> int:
        return self.antennas_per_side ** 2

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def to_dict(self) -> dict:
        return {
            "antennas_per_side": int(self.antennas_per_side),
            "carrier_frequency": float(self.carrier_frequency),
            "element_spacing": float(self.element_spacing),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArrayConfig":
        return cls(int(d["antennas_per_side"]), float(d["carrier_frequency"]),
                   d.get("element_spacing"))


@dataclass(frozen=True)
class Direction:
    """Departure direction; azimuth in (-pi, pi], elevation in [-pi/2, pi/2]."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (-np.pi < self.azimuth <= np.pi):
            raise ValueError(f"azimuth {self.azimuth} outside (-pi, pi]")
        if not (-np.pi / 2 <= self.elevation <= np.pi / 2):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")

    @classmethod
    def from_vector(cls, v) -> "Direction":
        """Direction of a nonzero 3D vector."""
        x, y, z = (float(c) for c in v)
        az = np.arctan2(y, x)
        if az == -np.pi:
            az = np.pi
        el = np.arctan2(z, np.hypot(x, y))
        return cls(float(az), float(el))


def element_positions(cfg: ArrayConfig) -> np.ndarray:
    """(A, 3) element coordinates in meters."""
    idx = np.arange(cfg.antennas_per_side)
    m, n = np.meshgrid(idx, idx, indexing="ij")
    pos = np.zeros((cfg.num_antennas, 3))
    pos[:, 1] = m.ravel() * cfg.element_spacing
    pos[:, 2] = n.ravel() * cfg.element_spacing
    return pos


def unit_vectors(azimuth, elevation) -> np.ndarray:
    """Propagation unit vectors, shape ``broadcast(azimuth, elevation) + (3,)``."""
    az = np.asarray(azimuth, dtype=float)
    el = np.asarray(elevation, dtype=float)
    ce = np.cos(el)
    return np.stack(np.broadcast_arrays(ce * np.cos(az), ce * np.sin(az), np.sin(el)), axis=-1)


def steering_vectors(cfg: ArrayConfig, azimuth, elevation) -> np.ndarray:
    """Vectorized steering vectors, shape ``broadcast(azimuth, elevation) + (A,)``."""
    u = unit_vectors(azimuth, elevation)
    phase = (2 * np.pi / cfg.wavelength) * (u @ element_positions(cfg).T)
    return np.exp(1j * phase)


def steering_vector(cfg: ArrayConfig, direction: Direction) -> np.ndarray:
    """Unit-modulus array response toward ``direction`` (squared norm A)."""
    return steering_vectors(cfg, direction.azimuth, direction.elevation)
