"""Objective functions scoring candidate poses from the current GP belief."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .camera import ObservationTable, fov_candidates, relevant_occluders, visible_indices
from .geometry import (
    TWO_PI,
    AngleInterval,
    FovShape,
    camera_position,
    fov_boundary,
    fov_endpoints,
    to_camera_polar,
)
from .gp import ConfidenceSchedule, GPState, posterior
from .world import CurveSurface, SurfacePointSet, discretize

TAGS = ("OS", "OCU", "OCL", "IOA", "I", "C", "CS", "CSP", "CSW", "U", "UP", "CS-refined")
REQUIRES_TRUTH = frozenset({"OS"})
# objectives whose score is a sum over a summation interval around the pose
INTERVAL_OBJECTIVES = {"I": "simple", "C": "intersection", "CS": "simple", "CSP": "simple",
                       "CSW": "simple", "CS-refined": "simple"}


@dataclass(frozen=True)
class ObjectiveKind:
    tag: str

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown objective {self.tag!r}; expected one of {TAGS}")

    @property
    def requires_truth(self) -> bool:
        return self.tag in REQUIRES_TRUTH


@dataclass(frozen=True)
class Truth:
    """Ground truth available to the oracle and to the OS objective."""

    surface: SurfacePointSet
    table: ObservationTable | None = None


class RoundContext:
    """Everything an objective needs in round t, with per-round caches.

    Static-mode bounds are evaluated once on a fine periodic grid and linearly
    interpolated; growing-mode bounds are snapped to the round's uniform grid
    and computed lazily.
    """

    def __init__(self, state: GPState, schedule: ConfidenceSchedule, t: int, shape: FovShape,
                 h: float, d_max: float, step: float | None = None, truth: Truth | None = None,
                 observed: np.ndarray | None = None, resolution: int = 2880):
        if t < 1:
            raise ValueError("round index t must be at least 1")
        self.state, self.schedule, self.t = state, schedule, t
        self.shape, self.h, self.d_max = shape, h, d_max
        self.step = step if step is not None else h / d_max
        if self.step <= 0:
            raise ValueError("summation step must be positive")
        self.truth = truth
        self.observed = observed
        self.resolution = resolution
        self.half_width = shape.half_width()
        self._sqrt_beta = schedule.sqrt_beta(t)
        self._offset = schedule.offset(t)
        self._grid_n = schedule.grid_size(t)
        self._fine = None
        self._snapped = {}
        self._curves = {}
        self._measured_pixels = None

    # ----- confidence bounds

    def _width(self, var):
        return self._sqrt_beta * np.sqrt(var) + self._offset

    def bounds(self, phi):
        """(u_t(phi), l_t(phi)) as arrays."""
        phi = np.asarray(phi, dtype=float)
        if self._grid_n is None:
            if self._fine is None:
                grid = TWO_PI * np.arange(self.resolution) / self.resolution
                mean, var = posterior(self.state, grid)
                w = self._width(var)
                self._fine = (grid, mean + w, mean - w)
            grid, up, lo = self._fine
            return (np.interp(phi, grid, up, period=TWO_PI), np.interp(phi, grid, lo, period=TWO_PI))
        return self._snapped_bounds(phi)

    def _snapped_bounds(self, phi):
        n = self._grid_n
        if not self._snapped:
            self._snapped = {"known": np.zeros(n, dtype=bool), "u": np.empty(n), "l": np.empty(n)}
        cache = self._snapped
        idx = np.mod(np.rint(phi / (TWO_PI / n)).astype(np.int64), n)
        need = np.unique(idx)
        need = need[~cache["known"][need]]
        if need.size:
            mean, var = posterior(self.state, need * (TWO_PI / n))
            w = self._width(var)
            cache["u"][need] = mean + w
            cache["l"][need] = mean - w
            cache["known"][need] = True
        return cache["u"][idx], cache["l"][idx]

    def round_grid(self, interval: AngleInterval) -> np.ndarray:
        """Points of the round's uniform grid D_t inside an interval."""
        n = self.schedule.grid_size(self.t)
        if n is None:
            n = ConfidenceSchedule("growing", a=self.schedule.a, b=self.schedule.b,
                                   delta=self.schedule.delta).grid_size(self.t)
        step = TWO_PI / n
        k0 = int(np.ceil(interval.lo / step - 1e-12))
        k1 = int(np.floor(interval.hi / step + 1e-12))
        return np.mod(np.arange(k0, k1 + 1), n) * step, n

    # ----- measured surface and bound curves

    def measured_pixels(self) -> np.ndarray:
        if self._measured_pixels is None:
            X, Y = self.state.X, self.state.Y
            pix = np.floor(np.column_stack([Y * np.cos(X), Y * np.sin(X)]) / self.h).astype(np.int64)
            self._measured_pixels = np.unique(pix, axis=0) if len(pix) else pix.reshape(0, 2)
        return self._measured_pixels

    def bound_curve(self, which: str) -> SurfacePointSet:
        if which not in self._curves:
            grid = TWO_PI * np.arange(self.resolution) / self.resolution
            u, l = self.bounds(grid)
            vals = np.clip(u if which == "upper" else l, self.h, self.shape.d_cam)
            curve = CurveSurface(lambda p: np.interp(p, grid, vals, period=TWO_PI),
                                 (self.h, self.shape.d_cam), name=f"{which}-bound")
            self._curves[which] = discretize(curve, self.h)
        return self._curves[which]


def sum_points(interval: AngleInterval, step: float) -> np.ndarray:
    """Left-anchored sample points lo + k*step for k = 0..floor(width/step)."""
    k = int(np.floor(interval.width / step + 1e-9))
    return interval.lo + step * np.arange(k + 1)


def phi_simple(theta: float, shape: FovShape) -> AngleInterval:
    return fov_endpoints(theta, shape)


def _first_crossing(theta, direction, ctx, scan_step, tol=1e-6):
    """Offset from theta where l_t first reaches the FOV boundary, or None."""
    half = ctx.half_width

    def gap(offset):
        phi = theta + direction * offset
        return ctx.bounds(phi)[1] - fov_boundary(phi, theta, ctx.shape)

    if gap(0.0) >= 0:
        return 0.0
    offsets = np.append(np.arange(scan_step, half, scan_step), half)
    phis = theta + direction * offsets
    gaps = ctx.bounds(phis)[1] - fov_boundary(phis, theta, ctx.shape)
    hit = np.flatnonzero(gaps >= 0)
    if hit.size == 0:
        return None
    j = hit[0]
    lo = offsets[j - 1] if j > 0 else 0.0
    hi = offsets[j]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def phi_intersection(theta: float, ctx: RoundContext, scan_step: float | None = None) -> AngleInterval:
    """Interval between the first crossings of l_t with the left and right FOV rays."""
    scan_step = scan_step or ctx.step
    if scan_step <= 0:
        raise ValueError("scan_step must be positive")
    left = _first_crossing(theta, -1, ctx, scan_step)
    right = _first_crossing(theta, +1, ctx, scan_step)
    left = ctx.half_width if left is None else left
    right = ctx.half_width if right is None else right
    return AngleInterval(theta - left, theta + right)


# ----- pixel enumeration for IOA


@lru_cache(maxsize=4096)
def _fov_pixels(theta: float, d_cam: float, d_dof: float, alpha: float, h: float):
    shape = FovShape(d_cam, d_dof, alpha)
    cx, cy = camera_position(theta, d_cam)
    look = theta + np.pi
    arc = look + np.linspace(-alpha / 2, alpha / 2, 65)
    xs = np.append(cx + d_dof * np.cos(arc), cx)
    ys = np.append(cy + d_dof * np.sin(arc), cy)
    ix = np.arange(int(np.floor(xs.min() / h)) - 1, int(np.floor(xs.max() / h)) + 2)
    iy = np.arange(int(np.floor(ys.min() / h)) - 1, int(np.floor(ys.max() / h)) + 2)
    gx, gy = np.meshgrid(ix, iy, indexing="ij")
    pix = np.column_stack([gx.ravel(), gy.ravel()])
    centers = (pix + 0.5) * h
    inside = fov_candidates(theta, centers, shape)
    pix, centers = pix[inside], centers[inside]
    phi = np.mod(np.arctan2(centers[:, 1], centers[:, 0]), TWO_PI)
    r = np.hypot(centers[:, 0], centers[:, 1])
    return pix, centers, phi, r


def ioa_pixels(theta: float, ctx: RoundContext) -> np.ndarray:
    """Pixels in the FOV, inside the confidence band and not hidden by measured surface."""
    shape = ctx.shape
    pix, centers, phi, r = _fov_pixels(float(theta), shape.d_cam, shape.d_dof, shape.alpha_fov, ctx.h)
    u, l = ctx.bounds(phi)
    band = (r >= l) & (r <= u)
    pix, centers = pix[band], centers[band]
    if len(pix) == 0:
        return pix
    cx, cy = camera_position(theta, shape.d_cam)
    reach = float(np.max(np.hypot(centers[:, 0] - cx, centers[:, 1] - cy)))
    occ = relevant_occluders(theta, ctx.measured_pixels(), ctx.h, shape, reach)
    clear = kernels.segments_clear(cx, cy, centers, pix, occ, ctx.h, 0)
    return pix[clear]


# ----- objectives


def _area_terms(ctx, phi, theta, weight_fov=False):
    u, l = ctx.bounds(phi)
    terms = 0.5 * (u * u - l * l)
    if weight_fov:
        terms = terms * fov_boundary(phi, theta, ctx.shape) / ctx.shape.d_cam
    return terms


def _os(theta, ctx):
    truth = ctx.truth
    if truth.table is not None:
        i = _pose_index(theta, truth.table)
        if i is not None:
            return float(truth.table.visible[i].sum())
    return float(len(visible_indices(theta, truth.surface, ctx.shape)))


def _pose_index(theta, table):
    n = len(table)
    k = theta / (TWO_PI / n)
    i = int(np.rint(k))
    return i % n if abs(k - i) < 1e-9 else None


def _oc(theta, ctx, which):
    curve = ctx.bound_curve(which)
    return float(len(visible_indices(theta, curve, ctx.shape)))


def _i(theta, ctx):
    phi = sum_points(phi_simple(theta, ctx.shape), ctx.step)
    u, l = ctx.bounds(phi)
    top = np.minimum(u, fov_boundary(phi, theta, ctx.shape))
    return float(np.sum(0.5 * np.maximum(top * top - l * l, 0.0)) * ctx.step / ctx.h**2)


def _c(theta, ctx):
    phi = sum_points(phi_intersection(theta, ctx), ctx.step)
    return float(np.sum(_area_terms(ctx, phi, theta)) * ctx.step / ctx.h**2)


def _cs(theta, ctx):
    phi = sum_points(phi_simple(theta, ctx.shape), ctx.step)
    return float(np.sum(_area_terms(ctx, phi, theta)) * ctx.step / ctx.h**2)


def _csp(theta, ctx):
    phi = sum_points(phi_simple(theta, ctx.shape), ctx.step)
    u, l = ctx.bounds(phi)
    return float(np.sum(u - l) * ctx.step / ctx.h**2)


def _csw(theta, ctx):
    phi = sum_points(phi_simple(theta, ctx.shape), ctx.step)
    return float(np.sum(_area_terms(ctx, phi, theta, weight_fov=True)) * ctx.step / ctx.h**2)


def _u(theta, ctx):
    u, l = ctx.bounds(np.array([theta]))
    return float(0.5 * 2 * ctx.half_width * (u[0] ** 2 - l[0] ** 2) / ctx.h**2)


def _up(theta, ctx):
    u, l = ctx.bounds(np.array([theta]))
    return float(2 * ctx.half_width * (u[0] - l[0]) / ctx.h**2)


def _cs_refined(theta, ctx):
    interval = phi_simple(theta, ctx.shape)
    phi, n = ctx.round_grid(interval)
    if phi.size == 0:
        return 0.0
    # |Phi^S| / |[Phi^S]_t| reduces to the grid spacing 2pi/|D_t|
    return float(np.sum(_area_terms(ctx, phi, theta)) * (TWO_PI / n) / ctx.h**2)


def _ioa(theta, ctx):
    return float(len(ioa_pixels(theta, ctx)))


_DISPATCH = {
    "OS": _os,
    "OCU": lambda th, c: _oc(th, c, "upper"),
    "OCL": lambda th, c: _oc(th, c, "lower"),
    "IOA": _ioa,
    "I": _i,
    "C": _c,
    "CS": _cs,
    "CSP": _csp,
    "CSW": _csw,
    "U": _u,
    "UP": _up,
    "CS-refined": _cs_refined,
}


def eval_objective(kind, theta: float, ctx: RoundContext) -> float:
    tag = kind.tag if isinstance(kind, ObjectiveKind) else ObjectiveKind(kind).tag
    if tag in REQUIRES_TRUTH and ctx.truth is None:
        raise ValueError(f"objective {tag} needs the true object in the context")
    return _DISPATCH[tag](float(theta), ctx)


def summation_interval(tag: str, theta: float, ctx: RoundContext) -> AngleInterval:
    """Interval an area-based objective sums over (used by two-phase planners)."""
    strategy = INTERVAL_OBJECTIVES.get(tag)
    if strategy is None:
        if tag in ("U", "UP"):
            return phi_simple(theta, ctx.shape)
        raise ValueError(f"objective {tag} has no summation interval")
    if strategy == "intersection":
        return phi_intersection(theta, ctx)
    return phi_simple(theta, ctx.shape)


def score_poses(tag: str, poses, ctx: RoundContext) -> np.ndarray:
    """Objective values at every candidate pose, vectorized where cheap."""
    poses = np.asarray(poses, dtype=float)
    if tag in ("U", "UP"):
        u, l = ctx.bounds(poses)
        if tag == "U":
            return ctx.half_width * (u * u - l * l) / ctx.h**2
        return 2 * ctx.half_width * (u - l) / ctx.h**2
    if tag == "OS" and ctx.truth is not None and ctx.truth.table is not None \
            and len(poses) == len(ctx.truth.table) and np.allclose(poses, ctx.truth.table.poses):
        return ctx.truth.table.visible.sum(axis=1).astype(float)
    if tag in ("CS", "CSP", "CSW", "I"):
        return _score_simple_sums(tag, poses, ctx)
    return np.array([eval_objective(tag, th, ctx) for th in poses])


def _score_simple_sums(tag, poses, ctx):
    # every pose shares the same offsets lo - theta + k*step
    half = ctx.half_width
    k = int(np.floor(2 * half / ctx.step + 1e-9))
    offsets = -half + ctx.step * np.arange(k + 1)
    phi = poses[:, None] + offsets[None, :]
    u, l = ctx.bounds(phi)
    if tag == "CSP":
        terms = u - l
    else:
        fov = None
        if tag in ("CSW", "I"):
            fov = fov_boundary(offsets, 0.0, ctx.shape)[None, :]
        if tag == "I":
            top = np.minimum(u, fov)
            terms = 0.5 * np.maximum(top * top - l * l, 0.0)
        else:
            terms = 0.5 * (u * u - l * l)
            if tag == "CSW":
                terms = terms * fov / ctx.shape.d_cam
    return np.sum(terms, axis=1) * ctx.step / ctx.h**2
