"""Frames, spherical coordinates and UPA steering vectors.

Element order is row-major: element ``(m_x, m_z)`` sits at flat index
``m_x * m_z_count + m_z`` (0-based), so ``a = kron(a_x, a_z)`` and any
``m_x x m_z`` phase matrix flattens with ``ravel()`` (C order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class Angle(NamedTuple):
    """Azimuth ``phi`` and elevation ``theta`` in radians."""

    phi: float
    theta: float


@dataclass(frozen=True)
class Upa:
    m_x: int
    m_z: int
    d: float

    def __post_init__(self):
        if self.m_x < 1 or self.m_z < 1:
            raise ValueError("UPA needs at least one element per axis")
        if self.d <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.m_x * self.m_z

    @property
    def element_positions(self) -> np.ndarray:
        """(m_x*m_z, 3) centred element coordinates in the local frame."""
        ix, iz = np.meshgrid(self.axis_offsets("x"), self.axis_offsets("z"), indexing="ij")
        pos = np.zeros((self.size, 3))
        pos[:, 0] = ix.ravel()
        pos[:, 2] = iz.ravel()
        return pos

    def axis_offsets(self, axis: str) -> np.ndarray:
        m = self.m_x if axis == "x" else self.m_z
        return (np.arange(m) - (m - 1) / 2.0) * self.d


@dataclass(frozen=True)
class Frame:
    origin: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float).reshape(3)
        rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=1e-12):
            raise ValueError("rotation matrix is not orthonormal")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "rotation", rotation)


def direction_vector(psi) -> np.ndarray:
    """Unit vector for azimuth/elevation ``psi``."""
    phi, theta = psi
    st = np.sin(theta)
    return np.array([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def direction_derivatives(psi) -> tuple[np.ndarray, np.ndarray]:
    """``(d omega / d phi, d omega / d theta)``.

    The azimuth derivative uses ``+sin(theta) cos(phi)`` in the y slot. Array
    elements have zero y-coordinate, so that slot never reaches a steering
    derivative.
    """
    phi, theta = psi
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    d_phi = np.array([-st * sp, st * cp, 0.0])
    d_theta = np.array([ct * cp, ct * sp, -st])
    return d_phi, d_theta


def wavevector(psi, wavelength: float) -> np.ndarray:
    """``mu(psi) = -(2 pi / lambda) omega(psi)``."""
    return -2.0 * np.pi / wavelength * direction_vector(psi)


def cart_to_local_spherical(target, frame: Frame) -> tuple[float, float, float]:
    """Range, azimuth and elevation of ``target`` seen from ``frame``."""
    delta = frame.rotation @ (np.asarray(target, dtype=float) - frame.origin)
    r = float(np.linalg.norm(delta))
    if r == 0.0:
        raise ValueError("coincident points")
    phi = float(np.arctan2(delta[1], delta[0]))
    theta = float(np.arccos(np.clip(delta[2] / r, -1.0, 1.0)))
    return r, phi, theta


def local_spherical_to_cart(r: float, psi, frame: Frame) -> np.ndarray:
    if r <= 0:
        raise ValueError("range must be positive")
    return frame.origin + frame.rotation.T @ (r * direction_vector(psi))


def steering_factors(upa: Upa, psi, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis responses ``(a_x, a_z)`` including the centring phases."""
    k = 2.0 * np.pi / wavelength
    omega = direction_vector(psi)
    a_x = np.exp(1j * k * omega[0] * upa.axis_offsets("x"))
    a_z = np.exp(1j * k * omega[2] * upa.axis_offsets("z"))
    return a_x, a_z


def steering_vector(upa: Upa, psi, wavelength: float) -> np.ndarray:
    a_x, a_z = steering_factors(upa, psi, wavelength)
    return np.kron(a_x, a_z)


def steering_derivatives(upa: Upa, psi, wavelength: float) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(da/dphi, da/dtheta)`` of the row-major steering vector."""
    a = steering_vector(upa, psi, wavelength)
    pos = upa.element_positions
    k = 2.0 * np.pi / wavelength
    d_phi, d_theta = direction_derivatives(psi)
    # d/dpsi exp(-j mu^T n) = a * (-j (dmu/dpsi)^T n), dmu/dpsi = -k domega/dpsi
    return a * (1j * k * (pos @ d_phi)), a * (1j * k * (pos @ d_theta))


def euler_rotation(yaw: float, pitch: float = 0.0, roll: float = 0.0) -> np.ndarray:
    """Z-Y-X rotation matrix (radians); maps global coordinates to local."""
    cz, sz = np.cos(yaw), np.sin(yaw)
    cy, sy = np.cos(pitch), np.sin(pitch)
    cx, sx = np.cos(roll), np.sin(roll)
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return (rz @ ry @ rx).T
