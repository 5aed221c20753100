"""Utility and regret accounting, information quantities, metrics and rankings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import observe
from .gp import Kernel, gram
from .planner import EARLY, FULL, EpisodeRecord


class _NotAvailable:
    """Marker for metrics that are undefined, e.g. T_ge95 after early termination."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "N/A"

    def __reduce__(self):
        return (_NotAvailable, ())


NA = _NotAvailable()
REC_THRESHOLD = 0.95


# ---------------------------------------------------------------- utility


def observed_set(poses, surface, obj, shape) -> set[float]:
    out: set[float] = set()
    for theta in poses:
        out.update(observe(theta, surface, obj, shape).tolist())
    return out


def utility(poses, obj, surface, shape) -> int:
    """Number of distinct surface points seen from any of the poses."""
    return len(observed_set(poses, surface, obj, shape))


def marginal_utility(theta, history, obj, surface, shape) -> int:
    seen = observed_set(history, surface, obj, shape)
    return len(set(observe(theta, surface, obj, shape).tolist()) - seen)


@dataclass
class RegretSeries:
    r_ind: np.ndarray
    planner_marginal: np.ndarray
    oracle_marginal: np.ndarray

    @classmethod
    def from_episode(cls, episode: EpisodeRecord) -> "RegretSeries":
        return cls(
            np.array([r.r_ind for r in episode.rounds], dtype=float),
            np.array([r.marginal_utility for r in episode.rounds], dtype=float),
            np.array([r.oracle_marginal_utility for r in episode.rounds], dtype=float),
        )

    @property
    def R_ind(self) -> np.ndarray:
        return np.cumsum(self.r_ind)

    def average(self, T: int | None = None) -> float:
        """R_ind(T)/T, using the full series when T is None."""
        T = len(self.r_ind) if T is None else T
        if T < 1:
            raise ValueError("need at least one round")
        return float(self.R_ind[T - 1] / T)


# ---------------------------------------------------------------- information


def _noise_check(sigma_eps: float):
    if not sigma_eps > 0:
        raise ValueError("information gain is infinite for noise-free measurements (sigma_eps = 0)")


def information_gain(kernel: Kernel, batches, sigma_eps: float) -> float:
    """I(Y; f) accumulated over rounds as sum of 1/2 log det(sigma^-2 Sigma_{t-1}(X_t) + I)."""
    _noise_check(sigma_eps)
    return float(sum(information_gain_per_round(kernel, batches, sigma_eps)))


def information_gain_per_round(kernel: Kernel, batches, sigma_eps: float) -> np.ndarray:
    _noise_check(sigma_eps)
    noise = sigma_eps**2
    past = np.empty(0)
    gains = []
    for batch in batches:
        x = np.asarray(batch, dtype=float).ravel()
        if x.size == 0:
            gains.append(0.0)
            continue
        cov = _posterior_cov(kernel, past, x, noise)
        _, logdet = np.linalg.slogdet(cov / noise + np.eye(x.size))
        gains.append(0.5 * logdet)
        past = np.concatenate([past, x])
    return np.array(gains)


def _posterior_cov(kernel, past, x, noise):
    kxx = gram(kernel, x, x)
    if past.size == 0:
        return kxx
    kpp = gram(kernel, past, past) + noise * np.eye(past.size)
    kpx = gram(kernel, past, x)
    return kxx - kpx.T @ np.linalg.solve(kpp, kpx)


def information_gain_eigen(kernel: Kernel, batches, sigma_eps: float) -> float:
    """Same quantity via the eigenvalues of the joint prior covariance (chain rule)."""
    _noise_check(sigma_eps)
    x = np.concatenate([np.asarray(b, dtype=float).ravel() for b in batches]) if batches else np.empty(0)
    if x.size == 0:
        return 0.0
    lam = np.linalg.eigvalsh(gram(kernel, x, x))
    return float(0.5 * np.sum(np.log1p(np.clip(lam, 0.0, None) / sigma_eps**2)))


@dataclass
class VarianceSumReport:
    lhs: float
    rhs: float
    info_gain: float
    max_batch: int

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -1e-9 * max(1.0, abs(self.rhs))


def check_variance_sum_bound(kernel: Kernel, batches, sigma_eps: float) -> VarianceSumReport:
    """Half the summed prior-round variances against N_T/log(1+sigma^-2) times I(Y; f)."""
    _noise_check(sigma_eps)
    if float(kernel(0.0)) > 1.0 + 1e-12:
        raise ValueError("the inequality assumes k(x, x) <= 1; use sigma_f <= 1")
    noise = sigma_eps**2
    past = np.empty(0)
    lhs = 0.0
    max_batch = 0
    for batch in batches:
        x = np.asarray(batch, dtype=float).ravel()
        if x.size == 0:
            continue
        var = np.clip(np.diag(_posterior_cov(kernel, past, x, noise)), 0.0, None)
        lhs += 0.5 * float(var.sum())
        max_batch = max(max_batch, x.size)
        past = np.concatenate([past, x])
    gain = information_gain(kernel, batches, sigma_eps)
    rhs = max_batch / np.log1p(1.0 / noise) * gain if max_batch else 0.0
    return VarianceSumReport(lhs, float(rhs), gain, max_batch)


@dataclass
class CapacityCurve:
    T: np.ndarray
    gamma: np.ndarray
    shape: np.ndarray  # T^(1/(2nu+1)) log(T)^(2nu/(2nu+1)), fitted at T_max
    chosen: np.ndarray = field(repr=False)
    nu: float = 1.5

    def ratio(self, t_lo: int, t_hi: int) -> np.ndarray:
        """gamma_T divided by the unscaled growth shape, for T in [t_lo, t_hi]."""
        sel = (self.T >= t_lo) & (self.T <= t_hi)
        return self.gamma[sel] / self.growth(self.T[sel])

    def growth(self, T):
        return growth_shape(T, self.nu)


def growth_shape(T, nu: float):
    T = np.asarray(T, dtype=float)
    return T ** (1.0 / (2 * nu + 1)) * np.log(T) ** (2 * nu / (2 * nu + 1))


def info_capacity_curve(kernel: Kernel, T_max: int, sigma_eps: float, grid_size: int = 1024,
                        nu: float | None = None) -> CapacityCurve:
    """Greedy lower bound on the information capacity over a uniform angle grid.

    Each step adds the grid point with the largest posterior variance, which is
    the largest log-det increase for a single measurement.
    """
    _noise_check(sigma_eps)
    if T_max > grid_size:
        raise ValueError("T_max cannot exceed the number of grid points")
    nu = getattr(kernel, "nu", 1.5) if nu is None else nu
    grid = 2 * np.pi * np.arange(grid_size) / grid_size
    noise = sigma_eps**2
    var = np.full(grid_size, float(kernel(0.0)))
    # rows of the posterior covariance against chosen points, built incrementally
    basis = np.zeros((T_max, grid_size))
    chosen = np.empty(T_max, dtype=int)
    gains = np.empty(T_max)
    for t in range(T_max):
        j = int(np.argmax(var))
        chosen[t] = j
        gains[t] = 0.5 * np.log1p(var[j] / noise)
        cov_j = np.asarray(kernel(grid - grid[j]), dtype=float) - basis[:t, j] @ basis[:t]
        basis[t] = cov_j / np.sqrt(var[j] + noise)
        var = np.clip(var - basis[t] ** 2, 0.0, None)
    T = np.arange(1, T_max + 1)
    gamma = np.cumsum(gains)
    shape = np.full(T_max, np.nan)
    if T_max > 1:
        scale = gamma[-1] / growth_shape(T_max, nu)
        shape[1:] = scale * growth_shape(T[1:], nu)
    return CapacityCurve(T, gamma, shape, chosen, nu)


def gaussian_entropy(cov) -> float:
    """Differential entropy of N(m, cov) in nats."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    sign, logdet = np.linalg.slogdet(2 * np.pi * np.e * cov)
    if sign <= 0:
        raise ValueError("covariance must be positive definite")
    return 0.5 * float(logdet)


# ---------------------------------------------------------------- auxiliary inequalities
# Each returns the slack (rhs - lhs); nonnegative means the inequality holds.


def slack_log_ratio(x, c):
    """x <= c/log(c+1) * log(x+1) for 0 <= x <= c."""
    x, c = np.asarray(x, dtype=float), np.asarray(c, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        coef = np.where(c > 0, c / np.log1p(c), 1.0)
    return coef * np.log1p(x) - x


def slack_power_bound(x, c, beta):
    """(c + x^2)^-beta <= (1 + 1/c)^beta (1 + x)^(-2 beta) for c > 0, beta >= 0, x != -1."""
    x, c, beta = (np.asarray(v, dtype=float) for v in (x, c, beta))
    # compare in log space to stay finite for large beta
    lhs = -beta * np.log(c + x**2)
    rhs = beta * np.log1p(1.0 / c) - beta * np.log((1.0 + x) ** 2)
    return rhs - lhs


def slack_shifted_square(x, a, c):
    """(x + a)^2 <= c x^2 + c/(c-1) a^2 for c > 1."""
    x, a, c = (np.asarray(v, dtype=float) for v in (x, a, c))
    return c * x**2 + c / (c - 1) * a**2 - (x + a) ** 2


def slack_sum_square(x) -> float:
    """(sum x)^2 <= n sum x^2."""
    x = np.asarray(x, dtype=float)
    return float(x.size * np.sum(x**2) - np.sum(x) ** 2)


# ---------------------------------------------------------------- metrics


@dataclass
class MetricRow:
    planner: str
    object_name: str
    rec: float
    T: float
    T_ge95: object
    T_tilde: object
    T_ge95_tilde: object
    r_ind_bar: object
    termination: str
    seed: int | None = None
    object_class: str = ""
    error: str = ""


def first_round_reaching(episode: EpisodeRecord, threshold: float = REC_THRESHOLD):
    for r in episode.rounds:
        if r.cum_observed >= threshold * episode.n_points - 1e-9:
            return r.t
    return NA


def compute_metrics(episode: EpisodeRecord, oracle_episode: EpisodeRecord) -> MetricRow:
    T = episode.T
    t95 = first_round_reaching(episode)
    oracle_T = oracle_episode.T
    oracle_t95 = first_round_reaching(oracle_episode)
    T_tilde = T / oracle_T if oracle_T else NA
    T95_tilde = t95 / oracle_t95 if (t95 is not NA and oracle_t95 is not NA) else NA
    r_bar = float(np.mean([r.r_ind for r in episode.rounds])) if T else NA
    return MetricRow(
        planner=episode.planner, object_name=episode.object_name, rec=episode.rec, T=T,
        T_ge95=t95, T_tilde=T_tilde, T_ge95_tilde=T95_tilde, r_ind_bar=r_bar,
        termination=episode.termination, seed=episode.seed, error=episode.error,
    )


def _sort_key(value):
    return (1, 0.0) if value is NA or value is None else (0, float(value))


def rank_algorithms(rows, mode: str) -> dict[str, int]:
    """Dense ranking of planners; N/A sorts last.

    REC orders by T_ge95, then T, then descending rec. NBV orders by mean
    individual regret, then T_ge95, T and descending rec.
    """
    if mode == "REC":
        fields = ("T_ge95", "T")
    elif mode == "NBV":
        fields = ("r_ind_bar", "T_ge95", "T")
    else:
        raise ValueError(f"unknown ranking mode {mode!r}")

    def key(row):
        return tuple(_sort_key(getattr(row, f)) for f in fields) + ((0, -float(row.rec)),)

    ranks: dict[str, int] = {}
    rank, previous = 0, None
    for row in sorted(rows, key=key):
        k = key(row)
        if k != previous:
            rank += 1
            previous = k
        ranks[row.planner] = rank
    return ranks


def rec_is_full(row: MetricRow) -> bool:
    return row.rec >= 1.0 and row.termination == FULL


__all__ = [
    "EARLY", "FULL", "NA", "MetricRow", "RegretSeries", "utility", "marginal_utility",
    "information_gain", "information_gain_eigen", "check_variance_sum_bound", "info_capacity_curve",
    "compute_metrics", "rank_algorithms",
]
