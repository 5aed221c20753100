"""Kernels, periodizations, GP posterior and confidence bounds on the angle domain."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .geometry import TWO_PI

SUPPORTED_NU = (0.5, 1.5, 2.5)


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if nu not in SUPPORTED_NU:
        raise ValueError(f"only half-integer nu in {SUPPORTED_NU} is supported, got {nu}")
    return nu


# ---------------------------------------------------------------- kernels


class Kernel:
    """Stationary covariance k(r) on signed angle differences r."""

    kind = "abstract"
    periodic = False

    def __init__(self, sigma_f: float, lengthscale: float):
        if sigma_f < 0 or lengthscale <= 0:
            raise ValueError("need sigma_f >= 0 and lengthscale > 0")
        self.sigma_f = float(sigma_f)
        self.lengthscale = float(lengthscale)

    def __call__(self, r):
        raise NotImplementedError

    def describe(self) -> str:
        return f"{self.kind}(sigma_f={self.sigma_f:g}, l={self.lengthscale:g})"

    def __repr__(self):
        return self.describe()


class RBF(Kernel):
    kind = "rbf"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.sigma_f**2 * np.exp(-0.5 * (r / self.lengthscale) ** 2)


class Matern(Kernel):
    """Half-integer Matern in polynomial-times-exponential form."""

    kind = "matern"

    def __init__(self, nu: float, sigma_f: float, lengthscale: float):
        super().__init__(sigma_f, lengthscale)
        self.nu = _check_nu(nu)

    def __call__(self, r):
        a = np.abs(np.asarray(r, dtype=float)) * np.sqrt(2 * self.nu) / self.lengthscale
        if self.nu == 0.5:
            poly = 1.0
        elif self.nu == 1.5:
            poly = 1.0 + a
        else:
            poly = 1.0 + a + a * a / 3.0
        return self.sigma_f**2 * poly * np.exp(-a)

    def describe(self):
        return f"matern(nu={self.nu:g}, sigma_f={self.sigma_f:g}, l={self.lengthscale:g})"


class WarpedKernel(Kernel):
    """Periodization by warping angles onto the unit circle."""

    kind = "warped"
    periodic = True

    def __init__(self, base: Kernel):
        super().__init__(base.sigma_f, base.lengthscale)
        self.base = base

    def __call__(self, r):
        return self.base(2.0 * np.abs(np.sin(0.5 * np.asarray(r, dtype=float))))

    def describe(self):
        return f"warped[{self.base.describe()}]"


class PeriodicSumKernel(Kernel):
    """Symmetric finite periodic summation with kappa copies on each side."""

    kind = "psum-finite"
    periodic = True

    def __init__(self, base: Kernel, kappa: int):
        if int(kappa) != kappa or kappa < 0:
            raise ValueError(f"kappa must be a non-negative integer, got {kappa}")
        super().__init__(base.sigma_f, base.lengthscale)
        self.base = base
        self.kappa = int(kappa)
        self._shifts = TWO_PI * np.arange(-self.kappa, self.kappa + 1)
        self._norm = float(np.sum(base(self._shifts)))

    def _raw(self, r):
        r = np.asarray(r, dtype=float)
        return np.sum(self.base(r[..., None] + self._shifts), axis=-1)

    def __call__(self, r):
        if self._norm == 0:
            return np.zeros(np.shape(r))
        return self.sigma_f**2 * self._raw(r) / self._norm

    def describe(self):
        return f"psum[{self.base.describe()}, kappa={self.kappa}]"


class ClosedPeriodicMatern(Kernel):
    """Infinite periodic summation of a half-integer Matern in closed form.

    With c = sqrt(2 nu)/l, w = (r mod 2pi) - pi and u = c w, summing the
    Matern polynomial terms over all 2pi shifts gives (up to scale)
      nu=1/2: cosh u
      nu=3/2: (1 + c pi coth(c pi)) cosh u - u sinh u
      nu=5/2: (1 + m q - m^2/3 + 2 m^2 q^2 / 3) cosh u + u^2 cosh u / 3
              - (1 + 2 m q / 3) u sinh u,      m = c pi, q = coth(m)
    Hyperbolic terms are scaled by cosh(m) to stay finite for short lengthscales.
    """

    kind = "psum-closed"
    periodic = True

    def __init__(self, nu: float, sigma_f: float, lengthscale: float):
        super().__init__(sigma_f, lengthscale)
        self.nu = _check_nu(nu)
        self._c = np.sqrt(2 * self.nu) / self.lengthscale
        self._norm = float(self._raw(np.array(0.0)))

    def _raw(self, r):
        m = self._c * np.pi
        q = 1.0 / np.tanh(m)
        u = self._c * (np.mod(np.abs(np.asarray(r, dtype=float)), TWO_PI) - np.pi)
        scale = 1.0 + np.exp(-2 * m)
        ep, em = np.exp(u - m), np.exp(-u - m)
        ch = (ep + em) / scale
        sh = (ep - em) / scale
        if self.nu == 0.5:
            return ch
        if self.nu == 1.5:
            return (1 + m * q) * ch - u * sh
        a0 = 1 + m * q - m * m / 3 + 2 * m * m * q * q / 3
        return a0 * ch + u * u * ch / 3 - (1 + 2 * m * q / 3) * u * sh

    def __call__(self, r):
        return self.sigma_f**2 * self._raw(r) / self._norm

    def describe(self):
        return f"psum-closed(nu={self.nu:g}, sigma_f={self.sigma_f:g}, l={self.lengthscale:g})"


def _omega(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def truncation_weight(r, c1: float, c2: float):
    """Smooth step from 1 (|r| <= c1) to 0 (|r| >= c2)."""
    a = np.abs(np.asarray(r, dtype=float))
    width = c2 - c1
    up = _omega((c2 - a) / width)
    down = _omega((a - c1) / width)
    return up / (up + down)


class TruncatedKernel(Kernel):
    """Smoothly truncated base kernel, summed over the 2pi shifts its support reaches."""

    kind = "truncated"
    periodic = True

    def __init__(self, base: Kernel, c1: float, c2: float):
        if not 0 < c1 < c2:
            raise ValueError(f"truncation needs 0 < c1 < c2, got c1={c1}, c2={c2}")
        super().__init__(base.sigma_f, base.lengthscale)
        self.base, self.c1, self.c2 = base, float(c1), float(c2)
        self.kappa = int(np.ceil(self.c2 / TWO_PI))
        self._shifts = TWO_PI * np.arange(-self.kappa, self.kappa + 1)
        self._norm = float(self._raw(np.array(0.0)))

    def _raw(self, r):
        # the shifted sum is exactly periodic, so reduce to [-pi, pi) first
        r = np.mod(np.asarray(r, dtype=float) + np.pi, TWO_PI) - np.pi
        x = r[..., None] + self._shifts
        return np.sum(truncation_weight(x, self.c1, self.c2) * self.base(x), axis=-1)

    def __call__(self, r):
        if self._norm == 0:
            return np.zeros(np.shape(r))
        return self.sigma_f**2 * self._raw(r) / self._norm

    def describe(self):
        return f"truncated[{self.base.describe()}, c1={self.c1:g}, c2={self.c2:g}]"


def kernel_eval(k: Kernel, r):
    out = k(r)
    return float(out) if np.ndim(out) == 0 else out


def periodize_warp(k_base: Kernel) -> Kernel:
    return WarpedKernel(k_base)


def periodize_psum_finite(k_base: Kernel, kappa: int) -> Kernel:
    return PeriodicSumKernel(k_base, kappa)


def periodize_psum_closed(nu: float, sigma_f: float, lengthscale: float) -> Kernel:
    return ClosedPeriodicMatern(nu, sigma_f, lengthscale)


def periodize_truncate(k_base: Kernel, c1: float, c2: float) -> Kernel:
    return TruncatedKernel(k_base, c1, c2)


def make_kernel(kind: str, sigma_f: float, lengthscale: float, nu: float = 1.5, **extra) -> Kernel:
    """Build a kernel from a config-style description."""
    if kind == "rbf":
        return RBF(sigma_f, lengthscale)
    if kind == "matern":
        return Matern(nu, sigma_f, lengthscale)
    if kind == "matern-warped":
        return WarpedKernel(Matern(nu, sigma_f, lengthscale))
    if kind == "matern-psum-finite":
        return PeriodicSumKernel(Matern(nu, sigma_f, lengthscale), extra.get("kappa", 1))
    if kind == "matern-psum-closed":
        return ClosedPeriodicMatern(nu, sigma_f, lengthscale)
    if kind == "matern-truncated":
        return TruncatedKernel(Matern(nu, sigma_f, lengthscale), extra.get("c1", np.pi), extra.get("c2", TWO_PI))
    raise ValueError(f"unknown kernel kind {kind!r}")


def gram(k: Kernel, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return np.asarray(k(a[:, None] - b[None, :]), dtype=float)


# ---------------------------------------------------------------- inference

JITTER_START = 1e-10
JITTER_MAX = 1e-6


def stable_cholesky(matrix: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Lower Cholesky factor with escalating diagonal jitter relative to ``scale``."""
    scale = scale if scale > 0 else 1.0
    jitter = JITTER_START
    eye = np.eye(len(matrix))
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(matrix + jitter * scale * eye)
        except np.linalg.LinAlgError:
            jitter *= 10
    eig = np.linalg.eigvalsh(matrix).min() if len(matrix) else float("nan")
    raise np.linalg.LinAlgError(
        f"Cholesky failed up to jitter {JITTER_MAX:g}*scale; smallest eigenvalue {eig:.3e}, size {len(matrix)}"
    )


@dataclass(frozen=True)
class GPState:
    """GP conditioned on (X, Y); the Cholesky factor of K(X) + sigma_eps^2 I is cached."""

    kernel: Kernel
    mean_const: float
    sigma_eps: float
    X: np.ndarray = field(default_factory=lambda: np.empty(0))
    Y: np.ndarray = field(default_factory=lambda: np.empty(0))
    chol: np.ndarray = field(default=None, repr=False)
    alpha: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).ravel()
        Y = np.asarray(self.Y, dtype=float).ravel()
        if len(X) != len(Y):
            raise ValueError(f"{len(X)} inputs but {len(Y)} measurements")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be non-negative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if self.chol is None:
            K = gram(self.kernel, X, X) + self.sigma_eps**2 * np.eye(len(X))
            chol = stable_cholesky(K, self.kernel.sigma_f**2)
            object.__setattr__(self, "chol", chol)
            object.__setattr__(self, "alpha", cho_solve((chol, True), Y - self.mean_const) if len(X) else np.empty(0))

    def __len__(self):
        return len(self.X)


def update(state: GPState, x_new, y_new) -> GPState:
    x_new = np.asarray(x_new, dtype=float).ravel()
    y_new = np.asarray(y_new, dtype=float).ravel()
    if len(x_new) != len(y_new):
        raise ValueError(f"{len(x_new)} inputs but {len(y_new)} measurements")
    if len(x_new) == 0:
        return state
    # full refactorization keeps the factor exactly consistent with X
    return replace(state, X=np.concatenate([state.X, x_new]), Y=np.concatenate([state.Y, y_new]),
                   chol=None, alpha=None)


def posterior(state: GPState, query) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at the query angles."""
    q = np.asarray(query, dtype=float).ravel()
    prior_var = np.full(len(q), state.kernel.sigma_f**2)
    if len(state) == 0:
        return np.full(len(q), state.mean_const), prior_var
    kx = gram(state.kernel, q, state.X)
    mean = state.mean_const + kx @ state.alpha
    v = solve_triangular(state.chol, kx.T, lower=True)
    var = np.maximum(prior_var - np.sum(v * v, axis=0), 0.0)
    return mean, var


def posterior_cov(state: GPState, query) -> np.ndarray:
    q = np.asarray(query, dtype=float).ravel()
    prior = gram(state.kernel, q, q)
    if len(state) == 0:
        return prior
    v = solve_triangular(state.chol, gram(state.kernel, q, state.X).T, lower=True)
    return prior - v.T @ v


# ---------------------------------------------------------------- confidence


def growing_grid_size(t, a: float, b: float, delta: float):
    """Continuous size of the round-t discretization used for the confidence parameter."""
    return TWO_PI * b * np.sqrt(np.log(2 * a / delta)) * np.asarray(t, dtype=float) ** 2


def beta_growing(t, a: float = 1.0, b: float = 1.0, delta: float = 0.1):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 1):
        raise ValueError("round index t must be at least 1")
    pi_t = np.pi**2 * t**2 / 6
    out = 2 * np.log(growing_grid_size(t, a, b, delta) * pi_t / (delta / 2))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConfidenceSchedule:
    mode: str = "static"
    static_sqrt_beta: float = 2.0
    a: float = 1.0
    b: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if self.mode not in ("static", "growing"):
            raise ValueError(f"unknown confidence mode {self.mode!r}")
        if self.mode == "static" and self.static_sqrt_beta <= 0:
            raise ValueError("static_sqrt_beta must be positive")
        if self.mode == "growing":
            beta_growing(1, self.a, self.b, self.delta)

    def sqrt_beta(self, t: int) -> float:
        if self.mode == "static":
            return self.static_sqrt_beta
        return float(np.sqrt(beta_growing(t, self.a, self.b, self.delta)))

    def offset(self, t: int) -> float:
        return 1.0 / t**2 if self.mode == "growing" else 0.0

    def grid_size(self, t: int) -> int | None:
        """Number of points of the uniform snapping grid, None for the static mode."""
        if self.mode == "static":
            return None
        return int(np.ceil(growing_grid_size(t, self.a, self.b, self.delta)))

    def snap(self, phi, t: int):
        n = self.grid_size(t)
        phi = np.asarray(phi, dtype=float)
        if n is None:
            return phi
        step = TWO_PI / n
        return np.mod(np.rint(phi / step), n) * step


def confidence_bounds(state: GPState, query, schedule: ConfidenceSchedule, t: int):
    """Upper and lower confidence bounds u_t, l_t from the state after t-1 rounds."""
    if t < 1:
        raise ValueError("round index t must be at least 1")
    mean, var = posterior(state, schedule.snap(query, t))
    width = schedule.sqrt_beta(t) * np.sqrt(var) + schedule.offset(t)
    return mean + width, mean - width


# ---------------------------------------------------------------- spectra


def _spectral_normalizer(nu: float, lengthscale: float, terms: int = 1 << 16) -> float:
    base = 2 * nu / lengthscale**2
    p = nu + 0.5
    m = np.arange(1, terms + 1, dtype=float)
    head = base**-p + 2 * np.sum((base + m * m) ** -p)
    # integral tail of 2 * x^(-2p) beyond the last term
    tail = 2 * (terms + 0.5) ** (1 - 2 * p) / (2 * p - 1)
    return float(head + tail)


def spectral_density_periodic_matern(m, nu: float, sigma_f: float, lengthscale: float):
    """Fourier coefficient of the infinitely periodized Matern at integer frequency m.

    Coefficients sum to sigma_f^2 over all integers, so they are the weights of
    k(r) = sum_m S(m) exp(i m r).
    """
    nu = _check_nu(nu)
    scale = sigma_f**2 / _spectral_normalizer(nu, lengthscale)
    m = np.asarray(m, dtype=float)
    out = scale * (2 * nu / lengthscale**2 + m * m) ** -(nu + 0.5)
    return float(out) if out.ndim == 0 else out


def periodic_matern_eigenvalues(n: int, nu: float, sigma_f: float, lengthscale: float) -> np.ndarray:
    """The n largest Mercer eigenvalues, decreasing: S(0), S(1), S(1), S(2), S(2), ...

    Each frequency m >= 1 has a cosine and a sine eigenfunction.
    """
    freq = (np.arange(n) + 1) // 2
    return np.atleast_1d(spectral_density_periodic_matern(freq, nu, sigma_f, lengthscale))
