"""Free-space electromagnetic primitives for a y-polarized planar aperture.

Directions use the parametrization k = [cos(az) sin(el), sin(az) sin(el), cos(el)].
Although ``elevation`` is the conventional name, it is measured from the
aperture normal (z axis), i.e. it is a polar angle: elevation 0 is broadside.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 3e8
FREE_SPACE_IMPEDANCE = 120 * np.pi
U_Y = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class ApertureGeometry:
    lx: float
    ly: float

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError(f"aperture side lengths must be positive, got {self.lx} x {self.ly}")

    @property
    def area(self) -> float:
        return self.lx * self.ly


@dataclass(frozen=True)
class Medium:
    wavelength: float
    impedance: float = FREE_SPACE_IMPEDANCE

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if not self.impedance > 0:
            raise ValueError("impedance must be positive")

    @classmethod
    def from_frequency(cls, frequency_hz: float, impedance: float = FREE_SPACE_IMPEDANCE) -> "Medium":
        return cls(SPEED_OF_LIGHT / frequency_hz, impedance)

    @property
    def frequency(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength


@dataclass(frozen=True)
class Direction:
    """Far-field direction; angles in radians."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not -np.pi - 1e-12 <= self.azimuth <= np.pi + 1e-12:
            raise ValueError(f"azimuth {self.azimuth} outside [-pi, pi]")
        if not -1e-12 <= self.elevation <= np.pi / 2 + 1e-12:
            raise ValueError(f"elevation {self.elevation} outside [0, pi/2]")

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float) -> "Direction":
        return cls(np.deg2rad(azimuth_deg), np.deg2rad(elevation_deg))

    @property
    def degrees(self) -> tuple[float, float]:
        return float(np.rad2deg(self.azimuth)), float(np.rad2deg(self.elevation))


@dataclass(frozen=True)
class User:
    position: np.ndarray
    polarization: np.ndarray = field(default_factory=lambda: U_Y.copy())
    noise_var: float = 1.0
    symbol: complex = 1.0 + 0.0j

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        pol = np.asarray(self.polarization, dtype=float).reshape(3)
        if abs(np.linalg.norm(pol) - 1.0) > 1e-9:
            raise ValueError("user polarization must be a unit vector")
        if not self.noise_var > 0:
            raise ValueError("noise variance must be positive")
        if abs(pos[2]) < 1e-12:
            raise ValueError("user must not lie in the aperture plane z = 0")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "polarization", pol)
        object.__setattr__(self, "symbol", complex(self.symbol))


def propagation_vector(d: Direction) -> np.ndarray:
    st = np.sin(d.elevation)
    return np.array([np.cos(d.azimuth) * st, np.sin(d.azimuth) * st, np.cos(d.elevation)])


def _as_points3(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape[-1] == 2:
        s = np.concatenate([s, np.zeros(s.shape[:-1] + (1,))], axis=-1)
    return s


def dyadic_green(r, s, medium: Medium) -> np.ndarray:
    """Free-space dyadic Green's function G(r, s) as a 3x3 complex matrix."""
    diff = np.asarray(r, dtype=float) - _as_points3(s)
    dist = np.linalg.norm(diff)
    if dist <= 0:
        raise ValueError("observation point coincides with the source point")
    lam, eta = medium.wavelength, medium.impedance
    scale = -1j * eta * np.exp(-2j * np.pi * dist / lam) / (2 * lam * dist)
    p = diff / dist
    return scale * (np.eye(3) - np.outer(p, p))


def channel_samples(user: User, points, medium: Medium) -> np.ndarray:
    """Scalar channel H_k(s) = u_k^T G(r_k, s) u_y at an array of surface points."""
    pts = _as_points3(points)
    diff = user.position - pts
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist <= 0):
        raise ValueError("user position coincides with an aperture point")
    p = diff / dist[..., None]
    lam, eta = medium.wavelength, medium.impedance
    proj = user.polarization @ U_Y - (p @ user.polarization) * (p @ U_Y)
    return -1j * eta * np.exp(-2j * np.pi * dist / lam) / (2 * lam * dist) * proj


def channel_sample(user: User, s, medium: Medium) -> complex:
    return complex(channel_samples(user, np.asarray(s)[None, :], medium)[0])


def channel_matrix(users, points, medium: Medium) -> np.ndarray:
    """Stack channel samples into a (K, P) array."""
    pts = np.asarray(points)
    if len(users) == 0:
        return np.zeros((0, len(pts)), dtype=complex)
    return np.stack([channel_samples(u, pts, medium) for u in users])


def polarization_gain(d: Direction) -> float:
    """xi(theta, phi) = ||(I - r r^T) u_y||."""
    ky = np.sin(d.azimuth) * np.sin(d.elevation)
    return float(np.sqrt(max(0.0, 1.0 - ky * ky)))


def polarization_gain_grid(azimuth, elevation) -> np.ndarray:
    ky = np.sin(azimuth) * np.sin(elevation)
    return np.sqrt(np.clip(1.0 - ky * ky, 0.0, None))


def steering(d: Direction, points, medium: Medium) -> np.ndarray:
    """Unit-modulus far-field phase a(theta, phi, s) at surface points."""
    pts = np.asarray(points, dtype=float)
    k = propagation_vector(d)
    return np.exp(1j * medium.wavenumber * (pts[..., 0] * k[0] + pts[..., 1] * k[1]))


def path_loss(r: float, medium: Medium) -> float:
    """Distance factor of the far-field power density, eta^2 / (4 lambda^2 r^2)."""
    return medium.impedance ** 2 / (4 * medium.wavelength ** 2 * r ** 2)
