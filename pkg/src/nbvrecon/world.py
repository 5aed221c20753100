"""Objects as star-shaped polar surfaces and their per-pixel discretization."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import TWO_PI, wrap_angle

SWEEP_FRACTION = 0.5
# below this angular gap (an arc of ~1e-6 h) a diagonal jump is a corner crossing
_MIN_DPHI = 1e-8
# samples closer than this (in pixel units) to a pixel edge are ambiguous
_EDGE_TOL = 1e-9
_CHECK_ANGLES = np.linspace(0.0, TWO_PI, 4096, endpoint=False)


class SurfaceObject:
    """A 2pi-periodic surface function f(phi) with radial bounds (d_min, d_max).

    Subclasses implement ``_radius`` on normalized angle arrays.
    """

    kind = "abstract"

    def __init__(self, params: dict, bounds: tuple[float, float] = (2.0, 8.0), name: str = ""):
        d_min, d_max = map(float, bounds)
        if not 0 < d_min <= d_max:
            raise ValueError(f"bounds must satisfy 0 < d_min <= d_max, got {bounds}")
        self.params = dict(params)
        self.bounds = (d_min, d_max)
        self.name = name or self.kind
        self._validate_bounds()

    def _radius(self, phi: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, phi):
        r = self._radius(np.mod(np.asarray(phi, dtype=float), TWO_PI))
        return float(r) if np.ndim(r) == 0 else r

    def _validate_bounds(self):
        r = self._radius(_CHECK_ANGLES)
        d_min, d_max = self.bounds
        if r.min() < d_min - 1e-9 or r.max() > d_max + 1e-9:
            raise ValueError(
                f"{self.kind} surface spans [{r.min():.4g}, {r.max():.4g}], outside bounds {self.bounds}"
            )

    def points(self, phi) -> np.ndarray:
        """Cartesian boundary points, shape (n, 2)."""
        phi = np.asarray(phi, dtype=float)
        r = self(phi)
        return np.column_stack([r * np.cos(phi), r * np.sin(phi)])

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, params={self.params}, bounds={self.bounds})"


class Circle(SurfaceObject):
    kind = "circle"

    def __init__(self, r0: float, bounds=(2.0, 8.0), name: str = ""):
        self.r0 = float(r0)
        super().__init__({"r0": self.r0}, bounds, name)

    def _radius(self, phi):
        return np.full(np.shape(phi), self.r0)


class Ellipse(SurfaceObject):
    kind = "ellipse"

    def __init__(self, a: float, b: float, rotation: float = 0.0, bounds=(2.0, 8.0), name: str = ""):
        self.a, self.b, self.rotation = float(a), float(b), float(rotation)
        super().__init__({"a": self.a, "b": self.b, "rotation": self.rotation}, bounds, name)

    def _radius(self, phi):
        p = phi - self.rotation
        return self.a * self.b / np.sqrt((self.b * np.cos(p)) ** 2 + (self.a * np.sin(p)) ** 2)


class Flower(SurfaceObject):
    """Cosine oscillation around the middle of the radial bounds."""

    kind = "flower"

    def __init__(self, freq: int, amp: float, phase: float = 0.0, bounds=(2.0, 8.0), name: str = ""):
        if int(freq) != freq or freq < 0:
            raise ValueError(f"flower frequency must be a non-negative integer, got {freq}")
        self.freq, self.amp, self.phase = int(freq), float(amp), float(phase)
        self.center = 0.5 * (bounds[0] + bounds[1])
        super().__init__({"freq": self.freq, "amp": self.amp, "phase": self.phase}, bounds, name)

    def _radius(self, phi):
        return self.center + self.amp * np.cos(self.freq * phi - self.phase)


class Polygon(SurfaceObject):
    """Polygon that is star-shaped with respect to the origin.

    Vertices are given counter-clockwise. Star-shapedness with every boundary
    point visible from the origin is equivalent to the vertex polar angles
    increasing strictly around exactly one full turn.
    """

    kind = "polygon"

    def __init__(self, vertices, bounds=(2.0, 8.0), name: str = ""):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three (x, y) vertices")
        ang = np.arctan2(v[:, 1], v[:, 0])
        steps = np.mod(np.diff(np.append(ang, ang[0])), TWO_PI)
        if np.any(steps <= 1e-12) or np.any(steps >= np.pi) or abs(steps.sum() - TWO_PI) > 1e-9:
            raise ValueError("polygon is not star-shaped with respect to the origin")
        order = np.argsort(np.mod(ang, TWO_PI))
        self.vertices = v[order]
        self._angles = np.mod(ang[order], TWO_PI)
        super().__init__({"vertices": [tuple(map(float, p)) for p in self.vertices]}, bounds, name)

    @classmethod
    def square(cls, half_width: float, rotation: float = 0.0, bounds=(2.0, 8.0), name: str = ""):
        corners = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float) * half_width
        c, s = np.cos(rotation), np.sin(rotation)
        obj = cls(corners @ np.array([[c, s], [-s, c]]), bounds, name)
        obj.kind = "square"
        obj.params = {"half_width": float(half_width), "rotation": float(rotation)}
        return obj

    @classmethod
    def regular(cls, n: int, circumradius: float, rotation: float = 0.0, bounds=(2.0, 8.0), name: str = ""):
        t = rotation + TWO_PI * np.arange(n) / n
        return cls(np.column_stack([np.cos(t), np.sin(t)]) * circumradius, bounds, name)

    def _radius(self, phi):
        # edge i runs from vertex i to vertex i+1 and covers [angle_i, angle_{i+1})
        idx = np.searchsorted(self._angles, phi, side="right") - 1
        idx = np.mod(idx, len(self.vertices))
        p = self.vertices[idx]
        q = self.vertices[np.mod(idx + 1, len(self.vertices))]
        e = q - p
        ux, uy = np.cos(phi), np.sin(phi)
        # solve t*u = p + s*e for t
        return (p[..., 0] * e[..., 1] - p[..., 1] * e[..., 0]) / (ux * e[..., 1] - uy * e[..., 0])


class SampledSurface(SurfaceObject):
    """Periodic linear interpolation of values on a uniform angle grid."""

    kind = "gp-sample"

    def __init__(self, values, bounds=(2.0, 8.0), name: str = "", params: dict | None = None):
        self.values = np.asarray(values, dtype=float)
        self.grid = TWO_PI * np.arange(len(self.values)) / len(self.values)
        super().__init__(params or {"grid_size": len(self.values)}, bounds, name)

    def _radius(self, phi):
        return np.interp(phi, self.grid, self.values, period=TWO_PI)


class CurveSurface(SurfaceObject):
    """Wraps an arbitrary vectorized polar function, e.g. a confidence bound."""

    kind = "curve"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], bounds, name: str = "curve"):
        self._fn = fn
        super().__init__({}, bounds, name)

    def _radius(self, phi):
        return np.asarray(self._fn(phi), dtype=float)


def eval_surface(obj: SurfaceObject, phi):
    return obj(phi)


def sample_gp_object(kernel, mean: float, grid_size: int, seed: int, bounds=(2.0, 8.0), name: str = ""):
    """Draw a surface from GP(mean, kernel) on a uniform grid, clamped to bounds."""
    from .gp import gram, stable_cholesky

    if grid_size < 8:
        raise ValueError(f"grid_size must be at least 8, got {grid_size}")
    grid = TWO_PI * np.arange(grid_size) / grid_size
    chol = stable_cholesky(gram(kernel, grid, grid), kernel.sigma_f**2)
    rng = np.random.default_rng(seed)
    draw = mean + chol @ rng.standard_normal(grid_size)
    values = np.clip(draw, *bounds)
    params = {"grid_size": grid_size, "seed": seed, "mean": mean, "kernel": kernel.describe()}
    return SampledSurface(values, bounds, name or f"gp-{seed}", params)


@dataclass(frozen=True)
class SurfacePointSet:
    """One surface point per boundary-containing world pixel."""

    angles: np.ndarray
    pixel_ids: np.ndarray
    h: float
    radii: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.angles)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.radii * np.cos(self.angles), self.radii * np.sin(self.angles)])


def _edge_margin(pts: np.ndarray, h: float):
    """Containing pixels and the distance (in pixel units) to the nearest pixel edge."""
    scaled = pts / h
    pix = np.floor(scaled)
    frac = scaled - pix
    return pix.astype(np.int64), np.minimum(frac, 1.0 - frac).min(axis=1)


def _sweep(obj: SurfaceObject, h: float, max_step: float) -> np.ndarray:
    """Angles whose boundary samples form a 4-connected pixel chain.

    Starts from steps shorter than max_step and bisects every pair of
    consecutive unambiguous samples whose pixels are not edge neighbours, so
    pixels the boundary only clips at a corner are still found.
    """
    n = int(np.ceil(TWO_PI * obj.bounds[1] / (0.5 * max_step))) + 1
    phi = np.linspace(0.0, TWO_PI, n, endpoint=False)
    for _ in range(80):
        pts = obj.points(phi)
        gaps = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        nxt = np.append(phi[1:], TWO_PI)
        mids = [0.5 * (phi + nxt)[gaps >= max_step]]
        pix, margin = _edge_margin(pts, h)
        ok = np.flatnonzero(margin > _EDGE_TOL)
        a = phi[ok]
        b = np.append(a[1:], a[0] + TWO_PI)
        jump = np.abs(np.roll(pix[ok], -1, axis=0) - pix[ok]).sum(axis=1)
        split = np.flatnonzero((jump > 1) & (b - a > _MIN_DPHI))
        # bisect every raw interval between the pair; the plain midpoint may be
        # an ambiguous sample already present (e.g. on an axis)
        mark = np.zeros(len(phi) + 1, dtype=int)
        lo, hi = ok[split], np.append(ok[1:], ok[0] + len(phi))[split]
        np.add.at(mark, lo, 1)
        np.add.at(mark, np.minimum(hi, len(phi)), -1)
        wrapped = hi > len(phi)
        mark[0] += wrapped.sum()
        np.add.at(mark, hi[wrapped] - len(phi), -1)
        inside = np.cumsum(mark[:-1]) > 0
        mids.append(0.5 * (phi + nxt)[inside])
        mids = np.concatenate(mids)
        phi_new = np.unique(np.concatenate([phi, np.mod(mids, TWO_PI)]))
        if len(phi_new) == len(phi):
            return phi
        phi = phi_new
    raise RuntimeError("angular sweep did not converge; surface may be discontinuous")


def discretize(obj: SurfaceObject, h: float) -> SurfacePointSet:
    """Keep the smallest sweep angle entering each world pixel.

    Samples lying on a pixel edge to within rounding are ignored; otherwise a
    curve through a grid corner would claim the diagonal pixel it only touches.
    """
    if not h > 0:
        raise ValueError(f"pixel width must be positive, got {h}")
    phi = _sweep(obj, h, SWEEP_FRACTION * h)
    pix, margin = _edge_margin(obj.points(phi), h)
    keep = margin > _EDGE_TOL
    phi, pix = phi[keep], pix[keep]
    _, first = np.unique(pix, axis=0, return_index=True)
    first = np.sort(first)
    angles = phi[first]
    return SurfacePointSet(angles=angles, pixel_ids=pix[first], h=float(h), radii=obj(angles))


def rotate_angles(angles, delta: float) -> np.ndarray:
    return np.sort(wrap_angle(np.asarray(angles) + delta))
