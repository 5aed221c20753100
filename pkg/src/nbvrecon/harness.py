"""Experiment configuration, the object zoo, grid orchestration and CSV output."""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .camera import ObservationTable
from .evaluation import NA, MetricRow, compute_metrics, rank_algorithms
from .geometry import FovShape
from .gp import ConfidenceSchedule, make_kernel
from .planner import EpisodeRecord, PlannerSpec, Scenario, run_episode
from .world import Circle, Ellipse, Flower, Polygon, SurfaceObject, discretize

log = logging.getLogger(__name__)

DEFAULTS = {
    "world": {"h": 0.1, "d_min": 2.0, "d_max": 8.0},
    "camera": {"d_cam": 10.0, "d_dof": 10.0, "alpha_fov_deg": 35.0, "sigma_eps": 0.2},
    "gp": {"kind": "matern-psum-closed", "sigma_f": 1.5, "lengthscale": 0.2, "nu": 1.5, "mean": None},
    "confidence": {"mode": "static", "sqrt_beta": 2.0, "a": 1.0, "b": 1.0, "delta": 0.1},
    "planners": ["oracle", "greedy-CS", "greedy-U", "greedy-UP", "CS-U"],
    "objects": "all",
    "seeds": [0],
    "pose_grid": 360,
    "round_cap_factor": 10,
    "workers": 1,
}

EPISODE_COLUMNS = ["planner", "object", "seed", "t", "theta", "new_points", "marginal",
                   "oracle_marginal", "r_ind", "cum_observed"]
SUMMARY_COLUMNS = ["scope", "planner", "object", "class", "seed", "termination", "rec", "T", "T_ge95",
                   "T_tilde", "T_ge95_tilde", "r_ind_bar", "rank_rec", "rank_nbv", "error"]
CURVE_COLUMNS = ["planner", "object", "seed", "t", "rec", "R_ind"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    world: dict = field(default_factory=lambda: dict(DEFAULTS["world"]))
    camera: dict = field(default_factory=lambda: dict(DEFAULTS["camera"]))
    gp: dict = field(default_factory=lambda: dict(DEFAULTS["gp"]))
    confidence: dict = field(default_factory=lambda: dict(DEFAULTS["confidence"]))
    planners: list = field(default_factory=lambda: list(DEFAULTS["planners"]))
    objects: object = "all"
    seeds: list = field(default_factory=lambda: [0])
    pose_grid: int = 360
    round_cap_factor: int = 10
    workers: int = 1

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        merged = copy.deepcopy(DEFAULTS)
        for key, value in data.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(DEFAULTS[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"{key}: expected an object")
                for sub, v in value.items():
                    if sub not in DEFAULTS[key]:
                        raise ConfigError(f"unknown config key {key}.{sub!r}")
                    merged[key][sub] = v
            else:
                merged[key] = value
        return cls(**merged)

    def to_dict(self) -> dict:
        return {key: copy.deepcopy(getattr(self, key)) for key in DEFAULTS}

    def validate(self):
        w, c, g, conf = self.world, self.camera, self.gp, self.confidence
        for section, name in ((w, "world"), (c, "camera"), (g, "gp"), (conf, "confidence")):
            for key, value in section.items():
                if key in ("kind", "mode"):
                    if not isinstance(value, str):
                        raise ConfigError(f"{name}.{key}: expected a string")
                elif value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
                    raise ConfigError(f"{name}.{key}: expected a number, got {value!r}")
        if not w["h"] > 0:
            raise ConfigError("h: pixel width must be positive")
        if not 0 < w["d_min"] < w["d_max"]:
            raise ConfigError("d_min: need 0 < d_min < d_max")
        if not w["d_max"] < c["d_cam"]:
            raise ConfigError("d_cam: camera must be outside the object bounds (d_max < d_cam)")
        if not c["d_dof"] > 0:
            raise ConfigError("d_dof: must be positive")
        if not 0 < c["alpha_fov_deg"] < 180:
            raise ConfigError("alpha_fov_deg: must lie in (0, 180)")
        if c["sigma_eps"] < 0:
            raise ConfigError("sigma_eps: must be non-negative")
        try:
            FovShape(c["d_cam"], c["d_dof"], np.radians(c["alpha_fov_deg"])).half_width()
        except ValueError as exc:
            raise ConfigError(f"alpha_fov_deg: {exc}") from None
        if c["d_cam"] - w["d_max"] > c["d_dof"]:
            log.warning("d_cam - d_max exceeds d_dof; parts of the object can never be observed")
        if not (g["sigma_f"] > 0 and g["lengthscale"] > 0):
            raise ConfigError("sigma_f: kernel amplitude and lengthscale must be positive")
        try:
            self.kernel()
        except ValueError as exc:
            raise ConfigError(f"gp.kind: {exc}") from None
        try:
            self.schedule()
        except ValueError as exc:
            raise ConfigError(f"confidence.mode: {exc}") from None
        if not isinstance(self.planners, list) or not self.planners:
            raise ConfigError("planners: expected a non-empty list")
        for p in self.planners:
            try:
                PlannerSpec.parse(p, self.pose_grid)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"planners: {exc}") from None
        if not (isinstance(self.seeds, list) and self.seeds and all(isinstance(s, int) for s in self.seeds)):
            raise ConfigError("seeds: expected a non-empty list of integers")
        if not (isinstance(self.pose_grid, int) and self.pose_grid >= 8):
            raise ConfigError("pose_grid: expected an integer >= 8")
        if not (isinstance(self.round_cap_factor, int) and self.round_cap_factor >= 1):
            raise ConfigError("round_cap_factor: expected a positive integer")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError("workers: expected a positive integer")
        names = {spec.name for spec in zoo()}
        if self.objects != "all":
            if not isinstance(self.objects, list) or not self.objects:
                raise ConfigError("objects: expected \"all\" or a list of zoo names")
            unknown = [o for o in self.objects if o not in names]
            if unknown:
                raise ConfigError(f"objects: not in the zoo: {unknown}")

    def shape(self) -> FovShape:
        c = self.camera
        return FovShape(c["d_cam"], c["d_dof"], np.radians(c["alpha_fov_deg"]))

    def kernel(self):
        g = self.gp
        return make_kernel(g["kind"], g["sigma_f"], g["lengthscale"], g["nu"])

    def prior_mean(self) -> float:
        if self.gp["mean"] is not None:
            return float(self.gp["mean"])
        return 0.5 * (self.world["d_min"] + self.world["d_max"])

    def schedule(self) -> ConfidenceSchedule:
        c = self.confidence
        return ConfidenceSchedule(c["mode"], c["sqrt_beta"], c["a"], c["b"], c["delta"])

    def object_names(self) -> list[str]:
        if self.objects == "all":
            return [spec.name for spec in zoo()]
        return list(self.objects)


def _json_error(text: str, exc: json.JSONDecodeError) -> ConfigError:
    return ConfigError(f"config parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}")


def load_config(path) -> ExperimentConfig:
    """Read a JSON config; an empty file gives the defaults."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return ExperimentConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _json_error(text, exc) from None
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def save_config(config: ExperimentConfig, path):
    Path(path).write_text(dump_config(config), encoding="utf-8")


# ---------------------------------------------------------------- zoo


@dataclass(frozen=True)
class ZooEntry:
    name: str
    kind: str
    params: dict

    @property
    def object_class(self) -> str:
        return {"circle": "ellipse"}.get(self.kind, self.kind)

    def build(self, bounds=(2.0, 8.0)) -> SurfaceObject:
        p = self.params
        if self.kind == "circle":
            return Circle(p["r0"], bounds, self.name)
        if self.kind == "ellipse":
            return Ellipse(p["a"], p["b"], p.get("rotation", 0.0), bounds, self.name)
        if self.kind == "flower":
            return Flower(int(p["freq"]), p["amp"], p.get("phase", 0.0), bounds, self.name)
        if self.kind == "square":
            return Polygon.square(p["half_width"], p.get("rotation", 0.0), bounds, self.name)
        if self.kind == "polygon":
            return Polygon(p["vertices"], bounds, self.name)
        raise ValueError(f"unknown zoo object kind {self.kind!r}")


def _parse_value(key: str, text: str):
    if key == "vertices":
        return [tuple(float(c) for c in pair.split(":")) for pair in text.split(";")]
    return float(text)


def parse_zoo(text: str) -> list[ZooEntry]:
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        name, kind, *pairs = line.split()
        params = {}
        for pair in pairs:
            key, sep, value = pair.partition("=")
            if not sep:
                raise ValueError(f"zoo line {lineno}: expected key=value, got {pair!r}")
            params[key] = _parse_value(key, value)
        entries.append(ZooEntry(name, kind, params))
    return entries


def zoo() -> list[ZooEntry]:
    text = resources.files("nbvrecon").joinpath("data/zoo.txt").read_text(encoding="utf-8")
    return parse_zoo(text)


def zoo_entry(name: str) -> ZooEntry:
    for entry in zoo():
        if entry.name == name:
            return entry
    raise KeyError(f"no zoo object named {name!r}")


def build_scenario(config: ExperimentConfig, obj: SurfaceObject | str) -> Scenario:
    w = config.world
    if isinstance(obj, str):
        obj = zoo_entry(obj).build((w["d_min"], w["d_max"]))
    shape = config.shape()
    surface = discretize(obj, w["h"])
    table = ObservationTable(surface, shape, config.pose_grid)
    return Scenario(obj, surface, shape, table, config.kernel(), config.prior_mean(),
                    config.camera["sigma_eps"], config.schedule(), w["h"], w["d_max"])


# ---------------------------------------------------------------- orchestration


@dataclass
class CellResult:
    object_name: str
    object_class: str
    seed: int
    oracle: EpisodeRecord
    episodes: dict  # planner name -> EpisodeRecord


@dataclass
class ResultSet:
    config: ExperimentConfig
    cells: list[CellResult]
    rows: list[MetricRow]


def _run_cell(args) -> CellResult:
    config_dict, name, seed = args
    config = ExperimentConfig.from_dict(config_dict)
    entry = zoo_entry(name)
    scenario = build_scenario(config, name)
    oracle_spec = PlannerSpec.parse("oracle", config.pose_grid)
    oracle = run_episode(oracle_spec, scenario, seed, config.round_cap_factor * config.pose_grid)
    cap = config.round_cap_factor * max(oracle.T, 1)
    episodes = {}
    for text in config.planners:
        spec = PlannerSpec.parse(text, config.pose_grid)
        if spec.kind == "oracle":
            episodes[spec.name] = oracle
            continue
        try:
            episodes[spec.name] = run_episode(spec, scenario, seed, cap)
        except Exception as exc:  # a failing cell must not abort the grid
            log.exception("episode %s on %s (seed %d) failed", spec.name, name, seed)
            failed = EpisodeRecord(spec.name, name, seed, scenario.n_points)
            failed.termination = "error"
            failed.error = f"{type(exc).__name__}: {exc}"
            episodes[spec.name] = failed
    return CellResult(name, entry.object_class, seed, oracle, episodes)


def run_experiments(config: ExperimentConfig) -> ResultSet:
    jobs = [(config.to_dict(), name, seed) for name in config.object_names() for seed in config.seeds]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(job) for job in jobs]
    rows = []
    for cell in cells:
        for name, episode in cell.episodes.items():
            row = compute_metrics(episode, cell.oracle)
            row.object_class = cell.object_class
            rows.append(row)
    return ResultSet(config, cells, rows)


def _mean(values):
    values = [v for v in values if v is not NA and v is not None]
    return float(np.mean(values)) if values else NA


def aggregate(rows: list[MetricRow], scope: str, key) -> list[MetricRow]:
    """Per-planner means over groups of rows, keyed by ``key(row)``."""
    groups: dict = {}
    for row in rows:
        groups.setdefault((row.planner, key(row)), []).append(row)
    out = []
    for (planner, group), members in groups.items():
        out.append(MetricRow(
            planner=planner, object_name=group if scope == "class" else "*",
            rec=_mean([m.rec for m in members]), T=_mean([m.T for m in members]),
            T_ge95=_mean([m.T_ge95 for m in members]), T_tilde=_mean([m.T_tilde for m in members]),
            T_ge95_tilde=_mean([m.T_ge95_tilde for m in members]),
            r_ind_bar=_mean([m.r_ind_bar for m in members]),
            termination="", seed=None, object_class=group if scope == "class" else "*",
        ))
    return out


def _fmt(value) -> str:
    if value is NA:
        return "N/A"
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(round(value, 10))
    return str(value)


def _write_csv(path: Path, header: list[str], rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="")


def _summary_rows(results: ResultSet):
    rows = results.rows
    scopes = [("object", rows)]
    scopes.append(("class", aggregate(rows, "class", lambda r: r.object_class)))
    overall = aggregate(rows, "overall", lambda r: "*")
    scopes.append(("overall", overall))
    rank_rec = rank_algorithms(overall, "REC")
    rank_nbv = rank_algorithms(overall, "NBV")
    for scope, members in scopes:
        for r in members:
            yield [scope, r.planner, r.object_name, r.object_class, r.seed, r.termination, r.rec, r.T,
                   r.T_ge95, r.T_tilde, r.T_ge95_tilde, r.r_ind_bar,
                   rank_rec.get(r.planner, "") if scope == "overall" else "",
                   rank_nbv.get(r.planner, "") if scope == "overall" else "", r.error]


def emit_outputs(results: ResultSet, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    episode_rows, curve_rows = [], []
    for cell in results.cells:
        for name, ep in cell.episodes.items():
            cum_regret = 0
            for r in ep.rounds:
                cum_regret += r.r_ind
                episode_rows.append([name, cell.object_name, cell.seed, r.t, r.theta, r.new_points,
                                     r.marginal_utility, r.oracle_marginal_utility, r.r_ind, r.cum_observed])
                curve_rows.append([name, cell.object_name, cell.seed, r.t, r.cum_observed / ep.n_points,
                                   cum_regret])
    paths = [out / "episodes.csv", out / "summary.csv", out / "curves.csv", out / "config.snapshot"]
    _write_csv(paths[0], EPISODE_COLUMNS, episode_rows)
    _write_csv(paths[1], SUMMARY_COLUMNS, _summary_rows(results))
    _write_csv(paths[2], CURVE_COLUMNS, curve_rows)
    paths[3].write_text(dump_config(results.config), encoding="utf-8")
    return paths
