import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbvrecon.evaluation import (
    NA,
    MetricRow,
    RegretSeries,
    check_variance_sum_bound,
    compute_metrics,
    first_round_reaching,
    info_capacity_curve,
    information_gain,
    information_gain_eigen,
    information_gain_per_round,
    marginal_utility,
    rank_algorithms,
    slack_log_ratio,
    slack_power_bound,
    slack_shifted_square,
    slack_sum_square,
    utility,
)
from nbvrecon.gp import ClosedPeriodicMatern, Matern
from nbvrecon.planner import EARLY, FULL, EpisodeRecord, PlannerSpec, RoundRecord, run_episode
from nbvrecon.world import TWO_PI, Polygon, discretize

from .conftest import DEFAULT_SHAPE, scenario


# ---------------------------------------------------------------- utility


@pytest.fixture(scope="module")
def hexagon():
    obj = Polygon.regular(6, 6.0, 0.2)
    return obj, discretize(obj, 0.1)


def test_utility_basic(hexagon):
    obj, surface = hexagon
    assert utility([], obj, surface, DEFAULT_SHAPE) == 0
    one = utility([0.3], obj, surface, DEFAULT_SHAPE)
    assert utility([0.3, 0.3], obj, surface, DEFAULT_SHAPE) == one
    assert marginal_utility(0.3, [0.3], obj, surface, DEFAULT_SHAPE) == 0
    assert marginal_utility(0.3, [], obj, surface, DEFAULT_SHAPE) == one


def test_full_grid_covers_convex_object(hexagon):
    obj, surface = hexagon
    poses = TWO_PI * np.arange(360) / 360
    assert utility(poses, obj, surface, DEFAULT_SHAPE) == len(surface)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0, TWO_PI), min_size=1, max_size=6))
def test_marginals_telescope(thetas):
    obj = Polygon.regular(5, 6.0)
    surface = _pentagon_surface()
    total = sum(marginal_utility(th, thetas[:i], obj, surface, DEFAULT_SHAPE) for i, th in enumerate(thetas))
    assert total == utility(thetas, obj, surface, DEFAULT_SHAPE)


_CACHE = {}


def _pentagon_surface():
    if "p" not in _CACHE:
        _CACHE["p"] = discretize(Polygon.regular(5, 6.0), 0.1)
    return _CACHE["p"]


def test_regret_series_sums():
    rec = run_episode(PlannerSpec.parse("greedy-UP"), scenario("circle-5"), 0, 60)
    series = RegretSeries.from_episode(rec)
    assert series.R_ind[-1] == sum(r.r_ind for r in rec.rounds)
    assert np.all(series.r_ind >= 0)
    assert np.array_equal(series.r_ind, series.oracle_marginal - series.planner_marginal)
    assert series.average() == pytest.approx(series.R_ind[-1] / rec.T)
    with pytest.raises(ValueError):
        series.average(0)


# ---------------------------------------------------------------- information


def test_single_point_gain():
    k = ClosedPeriodicMatern(1.5, 1.5, 0.2)
    assert information_gain(k, [[0.4]], 0.2) == pytest.approx(0.5 * np.log(1 + 1.5**2 / 0.2**2))


def test_zero_kernel_gain():
    k = Matern(1.5, 0.0, 1.0)
    assert information_gain(k, [[0.1, 0.5, 2.0]], 0.2) == 0.0


def test_three_point_batch_two_routes():
    k = ClosedPeriodicMatern(1.5, 1.0, 0.3)
    x = np.array([0.2, 0.5, 2.5])
    K = k(x[:, None] - x[None, :])
    lam = np.linalg.eigvalsh(K)
    eigen = 0.5 * np.sum(np.log(lam / 0.2**2 + 1))
    assert information_gain(k, [x], 0.2) == pytest.approx(eigen, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_sequential_gain_equals_joint(seed):
    rng = np.random.default_rng(seed)
    k = ClosedPeriodicMatern(1.5, 1.0, 0.2)
    batches = [rng.uniform(0, TWO_PI, rng.integers(1, 6)) for _ in range(rng.integers(1, 12))]
    a = information_gain(k, batches, 0.2)
    b = information_gain_eigen(k, batches, 0.2)
    assert abs(a - b) <= 1e-9
    assert np.all(information_gain_per_round(k, batches, 0.2) >= 0)


def test_gain_rejects_noise_free():
    with pytest.raises(ValueError):
        information_gain(ClosedPeriodicMatern(1.5, 1.0, 0.2), [[0.1]], 0.0)


def test_variance_sum_bound_edge_cases():
    k = ClosedPeriodicMatern(1.5, 1.0, 0.2)
    empty = check_variance_sum_bound(k, [], 0.2)
    assert empty.lhs == 0 and empty.rhs == 0 and empty.holds
    one = check_variance_sum_bound(k, [[0.3]], 0.2)
    # one point at the prior: 1/2 sigma^2 <= 1/log(1+s^-2) * 1/2 log(1 + sigma^2 s^-2)
    assert one.lhs == pytest.approx(0.5)
    assert one.rhs == pytest.approx(0.5)
    with pytest.raises(ValueError):
        check_variance_sum_bound(ClosedPeriodicMatern(1.5, 1.5, 0.2), [[0.3]], 0.2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_variance_sum_bound_random_episodes(seed):
    rng = np.random.default_rng(seed)
    k = ClosedPeriodicMatern(1.5, 1.0, 0.2)
    batches = [rng.uniform(0, TWO_PI, rng.integers(1, 8)) for _ in range(20)]
    report = check_variance_sum_bound(k, batches, 0.2)
    assert report.slack >= 0


def test_capacity_curve_shape():
    k = ClosedPeriodicMatern(2.5, 1.0, 0.2)
    curve = info_capacity_curve(k, 256, 0.2)
    assert curve.gamma[0] == pytest.approx(0.5 * np.log(1 + 1 / 0.04))
    inc = np.diff(np.concatenate([[0.0], curve.gamma]))
    assert np.all(inc >= 0) and np.all(np.diff(inc) <= 1e-12)
    ratio = curve.ratio(8, 256)
    assert ratio.max() / ratio.min() < 3
    assert curve.shape[-1] == pytest.approx(curve.gamma[-1])


def test_capacity_greedy_matches_logdet():
    k = ClosedPeriodicMatern(1.5, 1.0, 0.3)
    curve = info_capacity_curve(k, 12, 0.2, grid_size=256)
    x = 2 * np.pi * curve.chosen / 256
    assert information_gain(k, [x], 0.2) == pytest.approx(curve.gamma[-1], abs=1e-9)


# ---------------------------------------------------------------- auxiliary inequalities


def test_aux_log_ratio(rng):
    c = rng.uniform(0, 100, 10_000)
    x = rng.uniform(0, 1, 10_000) * c
    assert np.all(slack_log_ratio(x, c) >= -1e-9)


def test_aux_power_bound(rng):
    c, beta, x = rng.uniform(1e-3, 50, 10_000), rng.uniform(0, 5, 10_000), rng.normal(0, 5, 10_000)
    x = np.where(np.abs(1 + x) < 1e-6, x + 0.1, x)
    assert np.all(slack_power_bound(x, c, beta) >= -1e-9)


def test_aux_shifted_square(rng):
    x, a = rng.normal(0, 10, 10_000), rng.normal(0, 10, 10_000)
    c = 1 + rng.exponential(2, 10_000) + 1e-6
    assert np.all(slack_shifted_square(x, a, c) >= -1e-9 * (1 + x**2 + a**2))


def test_aux_sum_square(rng):
    assert all(slack_sum_square(rng.normal(size=rng.integers(1, 20))) >= -1e-9 for _ in range(10_000))


# ---------------------------------------------------------------- metrics


def make_episode(counts, n, termination, name="p"):
    ep = EpisodeRecord(name, "obj", 0, n)
    total = 0
    for t, c in enumerate(counts, 1):
        total += c
        ep.rounds.append(RoundRecord(t, 0.0, c, c, 0.0, c + 1, 1, total))
    ep.termination = termination
    return ep


def test_oracle_against_itself():
    rec = run_episode(PlannerSpec.parse("oracle"), scenario("square-4"), 0, 100)
    row = compute_metrics(rec, rec)
    assert row.T_tilde == 1.0 and row.T_ge95_tilde == 1.0 and row.r_ind_bar == 0.0 and row.rec == 1.0


def test_metrics_na_after_early_termination():
    oracle = make_episode([50, 30, 20], 100, FULL)
    early = make_episode([30, 20], 100, EARLY)
    row = compute_metrics(early, oracle)
    assert row.rec == 0.5 and row.T_ge95 is NA and row.T_ge95_tilde is NA
    assert row.T_tilde == pytest.approx(2 / 3) and row.r_ind_bar == 1.0
    assert first_round_reaching(oracle) == 3
    full = compute_metrics(make_episode([40, 56, 4], 100, FULL), oracle)
    assert full.rec == 1.0 and full.T_ge95 == 2 and full.T_ge95 <= full.T


def row(planner, t95, T, rec, r):
    return MetricRow(planner, "o", rec, T, t95, NA, NA, r, FULL)


def test_dense_rank_examples():
    rows = [row("a", 10, 12, 1.0, 1.0), row("b", 10, 12, 1.0, 1.0), row("c", 12, 12, 1.0, 1.0)]
    assert rank_algorithms(rows, "REC") == {"a": 1, "b": 1, "c": 2}
    same = [row(p, 5, 5, 1.0, 0.0) for p in "xyz"]
    assert set(rank_algorithms(same, "NBV").values()) == {1}
    with pytest.raises(ValueError):
        rank_algorithms(rows, "XYZ")


def brute_rank(rows, mode):
    """Group rows by their full comparison tuple, then number the sorted groups."""
    def val(v):
        return float("inf") if v is NA else float(v)

    fields = ["T_ge95", "T"] if mode == "REC" else ["r_ind_bar", "T_ge95", "T"]
    keys = {r.planner: tuple(val(getattr(r, f)) for f in fields) + (-r.rec,) for r in rows}
    distinct = sorted(set(keys.values()))
    return {p: distinct.index(k) + 1 for p, k in keys.items()}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([NA, 5, 6, 7]), st.integers(5, 8),
                          st.sampled_from([0.9, 1.0]), st.sampled_from([0.0, 1.5, 3.0])),
                min_size=1, max_size=8))
def test_rank_matches_brute_force(specs):
    rows = [row(f"p{i}", *s) for i, s in enumerate(specs)]
    for mode in ("REC", "NBV"):
        assert rank_algorithms(rows, mode) == brute_rank(rows, mode)


def test_na_sorts_last():
    rows = [row("early", NA, 3, 0.4, 5.0), row("ok", 20, 25, 1.0, 5.0)]
    assert rank_algorithms(rows, "REC") == {"ok": 1, "early": 2}


def test_rank_is_permutation_invariant():
    rows = [row("a", 5, 6, 1.0, 1.0), row("b", NA, 4, 0.5, 2.0), row("c", 7, 8, 1.0, 0.5)]
    ranks = {tuple(sorted(rank_algorithms(list(p), "NBV").items())) for p in itertools.permutations(rows)}
    assert len(ranks) == 1
