"""Observation (FOV, depth of field, occlusion) and noisy measurement of surface points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import FovShape, camera_position, to_camera_polar, wrap_angle
from .world import SurfaceObject, SurfacePointSet

_ANGLE_TOL = 1e-12

# Pixels touching the target's own pixel are treated as part of its local surface
# patch. With only the own pixel excluded, pixels at inner corners of the
# 4-connected boundary chain can never be seen.
DEFAULT_NEIGHBORHOOD = 1


def fov_candidates(theta: float, xy: np.ndarray, shape: FovShape) -> np.ndarray:
    """Mask of points inside the FOV cone (closed angular interval) and within depth of field."""
    phi = np.arctan2(xy[:, 1], xy[:, 0])
    r = np.hypot(xy[:, 0], xy[:, 1])
    view, dist = to_camera_polar(phi, r, theta, shape.d_cam)
    return (np.abs(view) <= shape.half_angle + _ANGLE_TOL) & (dist <= shape.d_dof + _ANGLE_TOL)


def relevant_occluders(theta: float, pixels: np.ndarray, h: float, shape: FovShape, reach: float) -> np.ndarray:
    """Pixels whose squares may intersect the FOV cone up to distance ``reach``."""
    centers = (pixels + 0.5) * h
    phi = np.arctan2(centers[:, 1], centers[:, 0])
    r = np.hypot(centers[:, 0], centers[:, 1])
    view, dist = to_camera_polar(phi, r, theta, shape.d_cam)
    half_diag = h / np.sqrt(2.0)
    margin = np.arcsin(np.clip(half_diag / np.maximum(dist, 1e-300), 0.0, 1.0))
    keep = (np.abs(view) <= shape.half_angle + margin + 1e-9) & (dist <= reach + half_diag)
    # squares containing the camera's neighborhood always stay in
    keep |= dist <= half_diag
    return pixels[keep]


def visible_indices(
    theta: float,
    surface: SurfacePointSet,
    shape: FovShape,
    neighborhood: int = DEFAULT_NEIGHBORHOOD,
) -> np.ndarray:
    """Indices into ``surface`` of the points observed from pose theta."""
    xy = surface.xy
    cand = np.flatnonzero(fov_candidates(theta, xy, shape))
    if cand.size == 0:
        return cand
    cx, cy = camera_position(theta, shape.d_cam)
    reach = float(np.max(np.hypot(xy[cand, 0] - cx, xy[cand, 1] - cy)))
    occ = relevant_occluders(theta, surface.pixel_ids, surface.h, shape, reach)
    clear = kernels.segments_clear(
        cx, cy, xy[cand], surface.pixel_ids[cand], occ, surface.h, neighborhood
    )
    return cand[clear]


def observe(theta: float, surface: SurfacePointSet, obj: SurfaceObject, shape: FovShape) -> np.ndarray:
    """Sorted angles of the surface points visible from theta.

    The point set already stores f(x_i); ``obj`` only has to agree with it.
    """
    return surface.angles[visible_indices(theta, surface, shape)]


@dataclass
class NoiseModel:
    sigma_eps: float
    seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma_eps < 0:
            raise ValueError(f"sigma_eps must be non-negative, got {self.sigma_eps}")
        self.rng = np.random.default_rng(self.seed)

    def draw(self, n: int) -> np.ndarray:
        if self.sigma_eps == 0:
            return np.zeros(n)
        return self.sigma_eps * self.rng.standard_normal(n)


def measure(points, obj: SurfaceObject, noise: NoiseModel) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return obj(points) + noise.draw(len(points))


@dataclass(frozen=True)
class Observation:
    theta: float
    visible: np.ndarray
    measurements: np.ndarray

    def __post_init__(self):
        if len(self.visible) != len(self.measurements):
            raise ValueError("visible points and measurements differ in length")
        object.__setattr__(self, "theta", wrap_angle(self.theta))


class ObservationTable:
    """Visibility of every surface point from every pose of a uniform grid.

    The observation function is deterministic, so planners and the oracle
    share one precomputed table per object.
    """

    def __init__(self, surface: SurfacePointSet, shape: FovShape, pose_grid: int = 360,
                 neighborhood: int = DEFAULT_NEIGHBORHOOD):
        self.surface = surface
        self.shape = shape
        self.poses = 2.0 * np.pi * np.arange(pose_grid) / pose_grid
        self.visible = np.zeros((pose_grid, len(surface)), dtype=bool)
        for i, theta in enumerate(self.poses):
            self.visible[i, visible_indices(theta, surface, shape, neighborhood)] = True

    def __len__(self):
        return len(self.poses)

    def coverable(self) -> np.ndarray:
        return self.visible.any(axis=0)
