"""Projected SGD with step ``1/(lam t)`` on ``F(w) = (lam/2) ||w - w*||^2`` over a ball.

The stochastic gradient is ``lam (w - w*) + c u`` with ``u`` uniform on the unit
sphere, so it is unbiased and bounded by ``lam (R + ||w*||) + c <= G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numba
import numpy as np

from .concentration import MomentProfile

MIN_START_TIME = 100


@dataclass(frozen=True)
class SgdConfig:
    d: int = 5
    lam: float = 1.0
    G: float = 2.0
    R: float = 1.0
    c: float = 1.0
    w_star: np.ndarray = field(default=None)

    def __post_init__(self):
        ws = np.zeros(self.d) if self.w_star is None else np.asarray(self.w_star, dtype=np.float64)
        object.__setattr__(self, "w_star", ws)
        if ws.shape != (self.d,):
            raise ValueError("w_star has the wrong dimension")
        if min(self.lam, self.G, self.R) <= 0 or self.c < 0:
            raise ValueError("lam, G, R must be positive and c non-negative")
        if np.linalg.norm(ws) > self.R:
            raise ValueError("w_star must lie inside the domain")
        if self.lam * (self.R + np.linalg.norm(ws)) + self.c > self.G * (1 + 1e-12):
            raise ValueError("oracle is not G-bounded: need lam (R + ||w*||) + c <= G")

    @property
    def potential_cap(self) -> float:
        return 4.0 * self.G**2 / self.lam**2

    def initial_point(self) -> np.ndarray:
        w0 = np.zeros(self.d)
        w0[0] = self.R
        return w0


@dataclass(frozen=True)
class SgdState:
    w: np.ndarray
    t: int = 0


def unit_sphere(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    shape = (d,) if size is None else (size, d)
    g = rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def project_ball(w: np.ndarray, R: float) -> np.ndarray:
    n = np.linalg.norm(w)
    return w if n <= R else w * (R / n)


def oracle_grad(w, cfg: SgdConfig, rng: np.random.Generator) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    return cfg.lam * (w - cfg.w_star) + cfg.c * unit_sphere(cfg.d, rng)


def sgd_step(state: SgdState, cfg: SgdConfig, rng: np.random.Generator) -> SgdState:
    """Step number ``t = state.t + 1`` with ``eta_t = 1/(lam t)``."""
    t = state.t + 1
    g = oracle_grad(state.w, cfg, rng)
    return SgdState(project_ball(state.w - g / (cfg.lam * t), cfg.R), t)


def sgd_potential(w, w_star) -> float:
    diff = np.asarray(w, dtype=np.float64) - np.asarray(w_star, dtype=np.float64)
    return float(diff @ diff)


def sgd_noise_term(w_prev, g_hat, t: int, cfg: SgdConfig) -> float:
    """``N_t = 2 eta (lam X_{t-1} - g^T (w - w*)) + eta^2 ||g||^2`` with ``eta = 1/(lam t)``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    eta = 1.0 / (cfg.lam * t)
    diff = np.asarray(w_prev, dtype=np.float64) - cfg.w_star
    g = np.asarray(g_hat, dtype=np.float64)
    return float(2 * eta * (cfg.lam * (diff @ diff) - g @ diff) + eta * eta * (g @ g))


def product_decay(T0: int, t: int) -> float:
    """``prod_{s=T0+1}^{t} (1 - 2/s) = T0 (T0-1) / (t (t-1))``."""
    if not 2 <= T0 <= t:
        raise ValueError("need 2 <= T0 <= t")
    return T0 * (T0 - 1) / (t * (t - 1))


def sgd_moment_profile(cfg: SgdConfig, T0: int) -> MomentProfile:
    if T0 < MIN_START_TIME:
        raise ValueError(f"T0 must be at least {MIN_START_TIME}")
    G2, l2 = cfg.G**2, cfg.lam**2
    return MomentProfile(
        bounded_diff=lambda t, Lam: 20 * G2 * t / (l2 * T0**2),
        cond_mean=lambda t, Lam: 2 * G2 / (l2 * T0**2),
        cond_var=lambda t, Lam: (G2 * t * t / (l2 * T0**4)) * (80 * Lam + 3 * G2 / (l2 * t * t)),
        start_time=T0,
    )


def clamped_loglog(t: int) -> float:
    """``max{log log(t+1), 0}``, and 0 where ``log(t+1) <= 1``."""
    inner = math.log(t + 1)
    return math.log(inner) if inner > 1 else 0.0


def sgd_bound(t: int, delta: float, guarantee: Literal["last", "uniform"], cfg: SgdConfig) -> float:
    if t < 1:
        raise ValueError("t must be at least 1")
    scale = 1000 * cfg.G**2 / (cfg.lam**2 * t)
    if guarantee == "last":
        return scale * math.log(1 / delta)
    if guarantee == "uniform":
        return scale * (math.log(1 / delta) + 2 * clamped_loglog(t))
    raise ValueError(f"unknown guarantee {guarantee!r}")


@numba.njit(cache=True, nogil=True)
def _sgd_path(w0, w_star, lam, c, R, dirs):
    T, d = dirs.shape
    X = np.empty(T + 1)
    N = np.empty(T)
    w = w0.copy()
    diff = w - w_star
    X[0] = np.dot(diff, diff)
    g = np.empty(d)
    for i in range(T):
        t = i + 1
        eta = 1.0 / (lam * t)
        for j in range(d):
            g[j] = lam * (w[j] - w_star[j]) + c * dirs[i, j]
        xprev = X[i]
        gd = 0.0
        gg = 0.0
        for j in range(d):
            gd += g[j] * (w[j] - w_star[j])
            gg += g[j] * g[j]
        N[i] = 2 * eta * (lam * xprev - gd) + eta * eta * gg
        nrm = 0.0
        for j in range(d):
            w[j] -= eta * g[j]
            nrm += w[j] * w[j]
        nrm = math.sqrt(nrm)
        if nrm > R:
            for j in range(d):
                w[j] *= R / nrm
        acc = 0.0
        for j in range(d):
            acc += (w[j] - w_star[j]) ** 2
        X[i + 1] = acc
    return X, N


def simulate(cfg: SgdConfig, horizon: int, rng: np.random.Generator, w0=None) -> tuple[np.ndarray, np.ndarray]:
    """Potential path ``X_0..X_T`` and noise terms ``N_1..N_T``."""
    w0 = cfg.initial_point() if w0 is None else np.asarray(w0, dtype=np.float64)
    dirs = unit_sphere(cfg.d, rng, size=horizon)
    return _sgd_path(w0, cfg.w_star, cfg.lam, cfg.c, cfg.R, dirs)


def simulate_reference(cfg: SgdConfig, dirs, w0=None) -> tuple[np.ndarray, np.ndarray]:
    """Same dynamics step by step in numpy, for cross-checking the kernel."""
    w = cfg.initial_point() if w0 is None else np.asarray(w0, dtype=np.float64)
    X, N = [sgd_potential(w, cfg.w_star)], []
    for i, u in enumerate(np.asarray(dirs)):
        t = i + 1
        g = cfg.lam * (w - cfg.w_star) + cfg.c * u
        N.append(sgd_noise_term(w, g, t, cfg))
        w = project_ball(w - g / (cfg.lam * t), cfg.R)
        X.append(sgd_potential(w, cfg.w_star))
    return np.array(X), np.array(N)


def minor_process(N, T0: int, t_end: int) -> np.ndarray:
    """``M_t = sum_{s=T0+1}^{t} N_s / D_s`` for ``t = T0..t_end`` with ``D_s = product_decay(T0, s)``.

    ``N[s-1]`` holds ``N_s``.
    """
    s = np.arange(T0 + 1, t_end + 1, dtype=np.float64)
    D = T0 * (T0 - 1) / (s * (s - 1))
    return np.concatenate(([0.0], np.cumsum(np.asarray(N)[T0:t_end] / D)))
