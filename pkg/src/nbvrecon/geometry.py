"""Planar geometry of the world: angles, camera rays, FOV boundary, sector areas."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
_SPAN_TOL = 1e-9


def wrap_angle(angle):
    """Normalize angles into [0, 2pi)."""
    out = np.mod(angle, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def signed_diff(a, b):
    """Shortest signed difference a - b, in [-pi, pi)."""
    d = np.mod(np.asarray(a, dtype=float) - b + np.pi, TWO_PI) - np.pi
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class PolarPoint:
    phi: float
    r: float

    def __post_init__(self):
        if not np.isfinite(self.r) or self.r < 0:
            raise ValueError(f"radius must be finite and non-negative, got {self.r}")
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))

    def to_cartesian(self) -> tuple[float, float]:
        return self.r * np.cos(self.phi), self.r * np.sin(self.phi)

    @classmethod
    def from_cartesian(cls, x: float, y: float) -> "PolarPoint":
        return cls(np.arctan2(y, x), float(np.hypot(x, y)))


@dataclass(frozen=True)
class AngleInterval:
    """Closed arc [lo, hi] on the circle, walked counter-clockwise from lo.

    ``lo`` is stored in [0, 2pi) and ``hi = lo + width`` with width in [0, 2pi],
    so ``hi`` may exceed 2pi when the arc wraps past zero.
    """

    lo: float
    hi: float

    def __post_init__(self):
        width = self.hi - self.lo
        if width < -1e-12:
            raise ValueError(f"interval upper end {self.hi} below lower end {self.lo}")
        width = min(max(width, 0.0), TWO_PI)
        lo = wrap_angle(float(self.lo))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", lo + width)

    @classmethod
    def around(cls, center: float, half_width: float) -> "AngleInterval":
        return cls(center - half_width, center + half_width)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, angle, tol: float = 1e-12):
        offset = np.mod(np.asarray(angle, dtype=float) - self.lo, TWO_PI)
        inside = (offset <= self.width + tol) | (offset >= TWO_PI - tol)
        return bool(inside) if np.ndim(inside) == 0 else inside


@dataclass(frozen=True)
class FovShape:
    """Camera placement radius, depth of field and full opening angle."""

    d_cam: float
    d_dof: float
    alpha_fov: float

    def __post_init__(self):
        if not self.d_cam > 0:
            raise ValueError(f"d_cam must be positive, got {self.d_cam}")
        if not self.d_dof >= 0:
            raise ValueError(f"d_dof must be non-negative, got {self.d_dof}")
        if not 0 < self.alpha_fov < np.pi:
            raise ValueError(f"alpha_fov must lie in (0, pi), got {self.alpha_fov}")

    @property
    def half_angle(self) -> float:
        return 0.5 * self.alpha_fov

    def half_width(self) -> float:
        """Polar half-width of the FOV seen from the world center."""
        num = self.d_dof * np.sin(self.half_angle)
        den = self.d_cam - self.d_dof * np.cos(self.half_angle)
        if den <= 0:
            raise ValueError(
                "FOV reaches past the world center (d_cam <= d_dof*cos(alpha_fov/2)); unsupported"
            )
        return float(np.arctan(num / den))

    def endpoint_distance(self) -> float:
        """Distance of the far FOV corners from the world center."""
        x = self.d_cam - self.d_dof * np.cos(self.half_angle)
        y = self.d_dof * np.sin(self.half_angle)
        return float(np.hypot(x, y))


def camera_position(theta, d_cam: float):
    return d_cam * np.cos(theta), d_cam * np.sin(theta)


def to_camera_polar(phi, r, theta, d_cam: float):
    """Viewing angle and distance of polar points as seen from the camera at theta.

    The viewing angle is measured from the line of sight toward the world
    center; positive values lie on the side of smaller polar angles.
    """
    delta = np.asarray(theta, dtype=float) - phi
    xc = d_cam - r * np.cos(delta)
    yc = r * np.sin(delta)
    return np.arctan2(yc, xc), np.hypot(xc, yc)


def _ray_tan(phi, theta, alpha, d_cam):
    m = np.tan(theta + alpha)
    return d_cam * (np.sin(theta) - m * np.cos(theta)) / (np.sin(phi) - m * np.cos(phi))


def _ray_cot(phi, theta, alpha, d_cam):
    c = 1.0 / np.tan(theta + alpha)
    return d_cam * (np.cos(theta) - c * np.sin(theta)) / (np.cos(phi) - c * np.sin(phi))


def ray(phi, theta: float, alpha: float, d_cam: float):
    """Radial distance at polar angle phi of the ray cast from the camera at theta.

    ``alpha`` is the casting angle relative to the line of sight; positive
    angles sweep toward smaller polar angles. Works elementwise on arrays.
    """
    if alpha == 0:
        raise ValueError("alpha = 0 casts through the world center; ray(phi) is undefined")
    if not abs(alpha) < np.pi / 2:
        raise ValueError(f"casting angle must satisfy |alpha| < pi/2, got {alpha}")
    d = np.asarray(signed_diff(phi, theta))
    if alpha > 0:
        ok = (d <= _SPAN_TOL) & (d > alpha - np.pi + _SPAN_TOL)
    else:
        ok = (d >= -_SPAN_TOL) & (d < np.pi + alpha - _SPAN_TOL)
    if not np.all(ok):
        raise ValueError("phi lies outside the angular span of the ray")

    phi = np.asarray(phi, dtype=float)
    direction = np.mod(theta + alpha, np.pi)
    if np.pi / 4 <= direction < 3 * np.pi / 4:
        r = _ray_cot(phi, theta, alpha, d_cam)
    else:
        r = _ray_tan(phi, theta, alpha, d_cam)
    r = np.where(np.abs(d) <= _SPAN_TOL, d_cam, r)
    return float(r) if r.ndim == 0 else r


def fov_endpoints(theta: float, shape: FovShape) -> AngleInterval:
    return AngleInterval.around(theta, shape.half_width())


def fov_boundary(phi, theta: float, shape: FovShape):
    """Radial distance of the left/right FOV rays at polar angle phi."""
    half = shape.half_width()
    d = np.asarray(signed_diff(phi, theta))
    if np.any(np.abs(d) > half + 1e-9):
        raise ValueError("phi outside the FOV endpoint interval")
    out = np.full(d.shape, float(shape.d_cam))
    left = d < 0
    right = d > 0
    phi_arr = np.broadcast_to(np.asarray(phi, dtype=float), d.shape)
    if np.any(left):
        out[left] = ray(phi_arr[left], theta, shape.half_angle, shape.d_cam)
    if np.any(right):
        out[right] = ray(phi_arr[right], theta, -shape.half_angle, shape.d_cam)
    return float(out) if out.ndim == 0 else out


def sector_area_diff(delta_phi, l, u):
    """Area of the annular sector between radii l and u over an angle delta_phi."""
    l = np.asarray(l, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(l > u):
        raise ValueError("inner radius exceeds outer radius")
    if np.any(np.asarray(delta_phi) < 0):
        raise ValueError("delta_phi must be non-negative")
    area = 0.5 * delta_phi * (u * u - l * l)
    return float(area) if np.ndim(area) == 0 else area
