"""Fast numerical self-checks behind ``nbvrecon check``.

Each check returns (name, passed, detail). Episode-level checks live in the
test suite because they take minutes.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .camera import ObservationTable
from .evaluation import (
    check_variance_sum_bound,
    info_capacity_curve,
    information_gain,
    information_gain_eigen,
    slack_log_ratio,
    slack_power_bound,
    slack_shifted_square,
    slack_sum_square,
)
from .geometry import FovShape
from .gp import JITTER_START, ClosedPeriodicMatern, GPState, Matern, PeriodicSumKernel, TruncatedKernel, posterior, update
from .world import Circle, discretize

GRID_720 = 2 * np.pi * np.arange(720) / 720


def check_matern_tail():
    k = Matern(1.5, 1.0, 1.0)
    a, b = float(k(2 * np.pi)), float(k(4 * np.pi))
    ok = f"{a:.1e}" == "2.2e-04" and f"{b:.1e}" == "8.0e-09"
    return "matern-3/2 tail values", ok, f"k(2pi)={a:.2e}, k(4pi)={b:.2e}"


def check_closed_periodic(lengthscale=0.2):
    worst = 0.0
    for nu in (0.5, 1.5, 2.5):
        closed = ClosedPeriodicMatern(nu, 1.0, lengthscale)(GRID_720)
        summed = PeriodicSumKernel(Matern(nu, 1.0, lengthscale), 50)(GRID_720)
        worst = max(worst, float(np.max(np.abs(closed - summed))))
    return "closed-form periodic sum", worst <= 1e-6, f"max error {worst:.1e} (l={lengthscale})"


def check_truncated(lengthscale=0.2):
    worst = 0.0
    for nu in (0.5, 1.5, 2.5):
        trunc = TruncatedKernel(Matern(nu, 1.0, lengthscale), np.pi, 2 * np.pi)(GRID_720)
        summed = PeriodicSumKernel(Matern(nu, 1.0, lengthscale), 1)(GRID_720)
        worst = max(worst, float(np.max(np.abs(trunc - summed))))
    return "truncated vs one-copy sum", worst <= 1e-3, f"max error {worst:.1e} (l={lengthscale})"


def check_gp(seed=0):
    rng = np.random.default_rng(seed)
    k = ClosedPeriodicMatern(1.5, 1.5, 0.2)
    x = np.sort(rng.uniform(0, 2 * np.pi, 12))
    y = 5 + rng.normal(size=12)
    exact = GPState(k, 5.0, 0.0, x, y)
    interp = float(np.max(np.abs(posterior(exact, x)[0] - y)))
    noisy = GPState(k, 5.0, 0.2)
    query = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    prior_var = float(k(0.0))
    excess = 0.0
    for chunk in np.array_split(np.arange(12), 4):
        noisy = update(noisy, x[chunk], y[chunk])
        excess = max(excess, float(np.max(posterior(noisy, query)[1] - prior_var)))
    split = float(np.max(np.abs(np.subtract(posterior(noisy, query), direct_posterior(k, 5.0, 0.2, x, y, query)))))
    ok = interp <= 1e-6 and excess <= 1e-8 and split <= 1e-8
    return "gp posterior", ok, f"interp {interp:.1e}, var excess {excess:.1e}, split-vs-batch {split:.1e}"


def direct_posterior(kernel, mean, sigma_eps, x, y, query):
    """Posterior mean and variance by a dense linear solve, independent of GPState.

    Includes the fixed diagonal jitter every factorization starts with.
    """
    noise = sigma_eps**2 + JITTER_START * kernel.sigma_f**2
    K = kernel(x[:, None] - x[None, :]) + noise * np.eye(len(x))
    kq = kernel(query[:, None] - x[None, :])
    sol = np.linalg.solve(K, np.column_stack([y - mean, kq.T]))
    return mean + kq @ sol[:, 0], float(kernel(0.0)) - np.sum(kq * sol[:, 1:].T, axis=1)


def check_information(seed=0):
    rng = np.random.default_rng(seed)
    k = ClosedPeriodicMatern(1.5, 1.0, 0.2)
    batches = [rng.uniform(0, 2 * np.pi, rng.integers(1, 6)) for _ in range(20)]
    a, b = information_gain(k, batches, 0.2), information_gain_eigen(k, batches, 0.2)
    report = check_variance_sum_bound(k, batches, 0.2)
    curve = info_capacity_curve(ClosedPeriodicMatern(2.5, 1.0, 0.2), 256, 0.2)
    ratio = curve.ratio(8, 256)
    spread = float(ratio.max() / ratio.min())
    ok = abs(a - b) <= 1e-9 and report.holds and spread < 3
    return "information quantities", ok, (
        f"log-det vs eigen {abs(a - b):.1e}, variance-sum slack {report.slack:.3g}, capacity ratio spread {spread:.2f}"
    )


def check_aux_inequalities(n=10_000, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0, 100, n)
    x = rng.uniform(0, 1, n) * c
    v1 = int(np.sum(slack_log_ratio(x, c) < -1e-9))
    c4, b4 = rng.uniform(1e-3, 50, n), rng.uniform(0, 5, n)
    x4 = rng.normal(0, 5, n)
    x4 = np.where(np.abs(1 + x4) < 1e-6, x4 + 0.1, x4)
    v4 = int(np.sum(slack_power_bound(x4, c4, b4) < -1e-9))
    x5, a5, c5 = rng.normal(0, 10, n), rng.normal(0, 10, n), 1 + rng.exponential(2, n) + 1e-6
    v5 = int(np.sum(slack_shifted_square(x5, a5, c5) < -1e-9 * (1 + x5**2 + a5**2)))
    v6 = sum(slack_sum_square(rng.normal(size=rng.integers(1, 20))) < -1e-9 for _ in range(n))
    total = v1 + v4 + v5 + v6
    return "auxiliary inequalities", total == 0, f"violations log-ratio={v1} power={v4} shifted-square={v5} sum-square={v6}"


def tiny_instance(n_poses=8, radius=5.0, h=0.5):
    surface = discretize(Circle(radius), h)
    return ObservationTable(surface, FovShape(10.0, 10.0, np.radians(35.0)), n_poses)


def coverage(table: ObservationTable, subset) -> int:
    if not subset:
        return 0
    return int(table.visible[list(subset)].any(axis=0).sum())


def check_submodular(T=3):
    table = tiny_instance()
    n = len(table)
    opt = max(coverage(table, s) for s in combinations(range(n), T))
    chosen: list[int] = []
    for _ in range(T):
        gains = [coverage(table, chosen + [i]) - coverage(table, chosen) for i in range(n)]
        chosen.append(int(np.argmax(gains)))
    greedy = coverage(table, chosen)
    violations = 0
    subsets = [frozenset(s) for r in range(n + 1) for s in combinations(range(n), r)]
    value = {s: coverage(table, s) for s in subsets}
    for big in subsets:
        for small in subsets:
            if not small <= big:
                continue
            violations += value[small] > value[big]
            for x in range(n):
                if x not in big:
                    violations += value[small | {x}] - value[small] < value[big | {x}] - value[big]
    ok = greedy >= (1 - 1 / np.e) * opt and violations == 0
    return "submodular coverage", ok, f"greedy {greedy} vs OPT {opt}, monotone/submodular violations {violations}"


ALL = (check_matern_tail, check_closed_periodic, check_truncated, check_gp, check_information,
       check_aux_inequalities, check_submodular)


def run_all():
    return [check() for check in ALL]
