"""Decision rules and the reconstruction episode loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .camera import NoiseModel, ObservationTable, measure
from .geometry import FovShape
from .gp import ConfidenceSchedule, GPState, Kernel, update
from .objectives import (
    INTERVAL_OBJECTIVES,
    TAGS,
    RoundContext,
    Truth,
    score_poses,
    summation_interval,
)
from .world import SurfaceObject, SurfacePointSet

log = logging.getLogger(__name__)

FULL = "full_reconstruction"
EARLY = "early_termination"
CAP = "round_cap"


@dataclass(frozen=True)
class PlannerSpec:
    kind: str
    objectives: tuple[str, ...] = ()
    pose_grid: int = 360

    def __post_init__(self):
        object.__setattr__(self, "objectives", tuple(self.objectives))
        if self.pose_grid < 8:
            raise ValueError(f"pose_grid must be at least 8, got {self.pose_grid}")
        expected = {"greedy": 1, "two_phase": 2, "oracle": 0}
        if self.kind not in expected:
            raise ValueError(f"unknown planner kind {self.kind!r}")
        if len(self.objectives) != expected[self.kind]:
            raise ValueError(f"{self.kind} planner takes {expected[self.kind]} objective(s)")
        for tag in self.objectives:
            if tag not in TAGS:
                raise ValueError(f"unknown objective {tag!r}")
        if self.kind == "two_phase" and self.objectives[0] not in (*INTERVAL_OBJECTIVES, "U", "UP"):
            raise ValueError(f"first objective {self.objectives[0]} has no summation interval")

    @property
    def name(self) -> str:
        if self.kind == "oracle":
            return "oracle"
        if self.kind == "greedy":
            return f"greedy-{self.objectives[0]}"
        return "-".join(self.objectives)

    @classmethod
    def parse(cls, text: str, pose_grid: int = 360) -> "PlannerSpec":
        """'oracle', 'greedy-CS', 'CS-U' (two-phase) or a bare objective tag."""
        if text == "oracle":
            return cls("oracle", (), pose_grid)
        if text.startswith("greedy-"):
            return cls("greedy", (text[len("greedy-"):],), pose_grid)
        if text in TAGS:
            return cls("greedy", (text,), pose_grid)
        for tag in sorted(TAGS, key=len, reverse=True):
            if text.startswith(tag + "-") and text[len(tag) + 1:] in TAGS:
                return cls("two_phase", (tag, text[len(tag) + 1:]), pose_grid)
        raise ValueError(f"cannot parse planner {text!r}")


@dataclass
class Scenario:
    """One object placed in the world together with the sensing and belief setup."""

    obj: SurfaceObject
    surface: SurfacePointSet
    shape: FovShape
    table: ObservationTable
    kernel: Kernel
    mean: float
    sigma_eps: float
    schedule: ConfidenceSchedule
    h: float
    d_max: float
    step: float | None = None

    @property
    def poses(self) -> np.ndarray:
        return self.table.poses

    @property
    def n_points(self) -> int:
        return len(self.surface)


@dataclass
class RoundRecord:
    t: int
    theta: float
    new_points: int
    marginal_utility: int
    oracle_theta: float
    oracle_marginal_utility: int
    r_ind: int
    cum_observed: int


@dataclass
class EpisodeRecord:
    planner: str
    object_name: str
    seed: int
    n_points: int
    rounds: list[RoundRecord] = field(default_factory=list)
    termination: str = CAP
    batches: list[np.ndarray] = field(default_factory=list, repr=False)
    error: str = ""

    @property
    def T(self) -> int:
        return len(self.rounds)

    @property
    def observed(self) -> int:
        return self.rounds[-1].cum_observed if self.rounds else 0

    @property
    def rec(self) -> float:
        return self.observed / self.n_points if self.n_points else 0.0

    def r_ind(self) -> np.ndarray:
        return np.array([r.r_ind for r in self.rounds], dtype=float)


def argmax_first(scores) -> int:
    """Index of the maximum; ties resolve to the smallest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0 or np.all(np.isnan(scores)):
        raise FloatingPointError("all objective scores are NaN")
    return int(np.argmax(np.where(np.isnan(scores), -np.inf, scores)))


def greedy_decide(tag: str, ctx: RoundContext, poses) -> int:
    """Index of the pose maximizing the objective."""
    return argmax_first(score_poses(tag, poses, ctx))


def two_phase_decide(tag1: str, tag2: str, ctx: RoundContext, poses) -> int:
    first = greedy_decide(tag1, ctx, poses)
    interval = summation_interval(tag1, poses[first], ctx)
    inside = np.flatnonzero(interval.contains(poses))
    if inside.size == 0:
        log.info("two-phase: no candidate inside the %s interval, keeping the first-phase pose", tag1)
        return first
    return int(inside[argmax_first(score_poses(tag2, poses[inside], ctx))])


def oracle_gains(table: ObservationTable, observed: np.ndarray) -> np.ndarray:
    """True marginal utility of every grid pose given the observed mask."""
    return (table.visible & ~observed).sum(axis=1)


def oracle_decide(table: ObservationTable, observed: np.ndarray) -> int:
    return argmax_first(oracle_gains(table, observed))


def decide(planner: PlannerSpec, ctx: RoundContext, table: ObservationTable, observed: np.ndarray) -> int:
    poses = table.poses
    if planner.kind == "oracle":
        return oracle_decide(table, observed)
    if planner.kind == "greedy":
        return greedy_decide(planner.objectives[0], ctx, poses)
    return two_phase_decide(planner.objectives[0], planner.objectives[1], ctx, poses)


def run_episode(planner: PlannerSpec, scenario: Scenario, seed: int, round_cap: int) -> EpisodeRecord:
    """Plan, observe, measure and update until full, early or capped termination."""
    table = scenario.table
    if planner.pose_grid != len(table):
        raise ValueError("planner pose grid differs from the scenario's observation table")
    record = EpisodeRecord(planner.name, scenario.obj.name, seed, scenario.n_points)
    state = GPState(scenario.kernel, scenario.mean, scenario.sigma_eps)
    noise = NoiseModel(scenario.sigma_eps, seed)
    observed = np.zeros(scenario.n_points, dtype=bool)
    truth = Truth(scenario.surface, table)
    needs_belief = planner.kind != "oracle"

    for t in range(1, round_cap + 1):
        ctx = RoundContext(state, scenario.schedule, t, scenario.shape, scenario.h, scenario.d_max,
                           scenario.step, truth, observed)
        i = decide(planner, ctx, table, observed)
        gains = oracle_gains(table, observed)
        j = argmax_first(gains)
        new = table.visible[i] & ~observed
        if not new.any():
            # the deterministic planner would keep re-selecting this pose
            record.termination = EARLY
            return record
        observed |= new
        # each surface point is measured once, when first observed
        angles = scenario.surface.angles[new]
        record.batches.append(angles)
        y = measure(angles, scenario.obj, noise)
        if needs_belief:
            state = update(state, angles, y)
        record.rounds.append(RoundRecord(
            t=t, theta=float(table.poses[i]), new_points=int(new.sum()),
            marginal_utility=int(gains[i]), oracle_theta=float(table.poses[j]),
            oracle_marginal_utility=int(gains[j]), r_ind=int(gains[j] - gains[i]),
            cum_observed=int(observed.sum()),
        ))
        if observed.all():
            record.termination = FULL
            return record
    record.termination = CAP
    return record


def oracle_rounds(scenario: Scenario, seed: int = 0) -> int:
    """Rounds the oracle needs for full reconstruction of the coverable points."""
    spec = PlannerSpec("oracle", (), len(scenario.table))
    return run_episode(spec, scenario, seed, 10 * len(scenario.table)).T
