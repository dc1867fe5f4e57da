"""Emerging-ray geometry.

The surface lies in the xy-plane and light arrives from the z > 0 half
space (plane of incidence yz).  A phase profile ``(theta, phi)`` fixes an
emerging direction:

* ``theta`` is the angle between the ray and the xz-plane,
* ``phi`` is the angle between the ray's projection on the xz-plane and
  the +z axis (incident side) or the -z axis (transmit side).

so that ``d = (cos t sin p, sin t, s cos t cos p)`` with ``s = +1`` on the
incident side and ``-1`` on the transmit side.
"""

from __future__ import annotations

import enum
import math
from typing import TYPE_CHECKING, Tuple

import numpy as np

from .errors import DegenerateDirectionError, DomainError

if TYPE_CHECKING:
    from .element import PhaseProfile

GRAZING_TOL = 1e-9
PLANE_TOL = 1e-9


class HalfSpace(enum.Enum):
    INCIDENT = 1
    TRANSMIT = -1

    @property
    def sign(self) -> int:
        return self.value

    @classmethod
    def of(cls, z: float) -> "HalfSpace":
        return cls.INCIDENT if z > 0 else cls.TRANSMIT


def _check_angle(name, value):
    if not -90.0 < value < 90.0:
        raise DomainError(name, f"must lie strictly inside (-90, 90), got {value!r}")


def directions(theta_deg, phi_deg, sign) -> np.ndarray:
    """Vectorised profile -> direction map; returns shape ``(..., 3)``."""
    t = np.radians(np.asarray(theta_deg, dtype=float))
    p = np.radians(np.asarray(phi_deg, dtype=float))
    ct = np.cos(t)
    return np.stack(
        np.broadcast_arrays(ct * np.sin(p), np.sin(t), np.asarray(sign) * ct * np.cos(p)),
        axis=-1,
    )


def direction_from_profile(profile, side: HalfSpace) -> np.ndarray:
    """Unit vector leaving the surface along ``profile`` on ``side``."""
    th, ph = profile.theta_deg, profile.phi_deg
    _check_angle("theta_deg", th)
    _check_angle("phi_deg", ph)
    t, p = math.radians(th), math.radians(ph)
    ct = math.cos(t)
    return np.array((ct * math.sin(p), math.sin(t), side.sign * ct * math.cos(p)))


def profile_from_direction(d) -> Tuple["PhaseProfile", HalfSpace]:
    """Inverse of :func:`direction_from_profile`.

    Raises:
        DegenerateDirectionError: zero vector or ``|z| <= 1e-9`` after
            normalisation (the ray grazes the surface).
    """
    from .element import PhaseProfile

    x, y, z = d
    x, y, z = float(x), float(y), float(z)
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0.0 or not math.isfinite(norm):
        raise DegenerateDirectionError(f"cannot take the profile of {tuple(d)}")
    if abs(z) / norm <= GRAZING_TOL:
        raise DegenerateDirectionError(f"direction {tuple(d)} grazes the surface plane")
    side = HalfSpace.of(z)
    sz = side.sign * z
    theta = math.degrees(math.atan2(y, math.hypot(x, sz)))
    phi = math.degrees(math.atan2(x, sz))
    return PhaseProfile(theta, phi), side


def aim_profile(element_pos, target_pos) -> Tuple["PhaseProfile", HalfSpace]:
    """Profile (and side) pointing from a surface element at ``target_pos``."""
    e = np.asarray(element_pos, dtype=float)
    t = np.asarray(target_pos, dtype=float)
    if abs(e[2]) > PLANE_TOL:
        raise DomainError("element_pos", f"element must lie on z=0, got z={e[2]!r}")
    v = t - e
    if not np.any(v):
        raise DegenerateDirectionError("target coincides with the element")
    return profile_from_direction(v / np.linalg.norm(v))


def angular_error(a, b) -> float:
    """Angle in radians between unit vectors ``a`` and ``b``."""
    dot = float(np.dot(a, b))
    return math.acos(min(1.0, max(-1.0, dot)))


def specular_direction(incident) -> np.ndarray:
    """Mirror ``incident`` across the surface plane."""
    x, y, z = np.asarray(incident, dtype=float)
    return np.array([x, y, -z])
