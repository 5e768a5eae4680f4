"""LinUCB with one SGD-style update per round on a synthetic linear bandit.

Each round the agent sees ``K`` actions drawn uniformly from the ball of
radius ``L``, plays the one maximising ``<x, theta> + sqrt(beta) ||x||_{V^-1}``
and receives ``<theta*, x> + eps`` with ``eps ~ U[-1, 1]``. The estimate moves
by ``eta V^{-1} (y - <theta, x>) x`` and ``V`` gains ``eta x x^T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .matrix_kernels import sherman_morrison, weighted_norm_sq

INVERSE_CHECK_PERIOD = 512
INVERSE_TOL = 1e-8


@dataclass(frozen=True)
class BanditConfig:
    d: int = 4
    K: int = 20
    lam: float = 1.0
    L: float = 1.0
    L_star: float = 1.0
    T: int = 10_000
    delta: float = 0.1
    eta: float | None = None
    theta_star: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if min(self.lam, self.L, self.L_star) <= 0 or self.d < 1 or self.T < 1:
            raise ValueError("lam, L, L_star, d and T must be positive")
        if self.K < 2:
            raise ValueError("need at least two actions per round")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        eta = self.lam / self.L**2 if self.eta is None else float(self.eta)
        if not 0 < eta <= self.lam / self.L**2 * (1 + 1e-12):
            raise ValueError("need 0 < eta <= lam / L^2")
        object.__setattr__(self, "eta", eta)
        if self.theta_star is None:
            ts = np.zeros(self.d)
            ts[0] = self.L_star
        else:
            ts = np.asarray(self.theta_star, dtype=np.float64)
        if ts.shape != (self.d,) or np.linalg.norm(ts) > self.L_star * (1 + 1e-12):
            raise ValueError("theta_star must be a d-vector of norm at most L_star")
        object.__setattr__(self, "theta_star", ts)

    def with_random_direction(self, rng: np.random.Generator) -> "BanditConfig":
        g = rng.standard_normal(self.d)
        return BanditConfig(
            self.d, self.K, self.lam, self.L, self.L_star, self.T, self.delta, self.eta,
            self.L_star * g / np.linalg.norm(g),
        )


@dataclass
class BanditState:
    """Agent state. ``step`` returns a new state; the history lists are shared and appended to."""

    theta: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    t: int = 0
    cumulative_regret: float = 0.0
    potential_history: list = field(default_factory=list)
    quad_form_history: list = field(default_factory=list)

    @classmethod
    def initial(cls, cfg: BanditConfig) -> "BanditState":
        state = cls(np.zeros(cfg.d), cfg.lam * np.eye(cfg.d), np.eye(cfg.d) / cfg.lam)
        state.potential_history.append(bandit_potential(state, cfg))
        return state


def log_ratio(cfg: BanditConfig) -> float:
    return math.log(1 + cfg.T / cfg.d)


def beta_t(cfg: BanditConfig) -> float:
    """``288 max{L*^2 lam, (d lam / L^2) log(1 + T/d) log(1/delta)}``."""
    return 288 * max(
        cfg.L_star**2 * cfg.lam,
        cfg.d * cfg.lam / cfg.L**2 * log_ratio(cfg) * math.log(1 / cfg.delta),
    )


def gen_decision_set(cfg: BanditConfig, rng: np.random.Generator, rounds: int | None = None) -> np.ndarray:
    """``K`` points uniform in the radius-``L`` ball (shape ``(K, d)``, or ``(rounds, K, d)``)."""
    shape = (cfg.K,) if rounds is None else (rounds, cfg.K)
    g = rng.standard_normal(shape + (cfg.d,))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    r = cfg.L * rng.random(shape) ** (1.0 / cfg.d)
    return g * r[..., None]


def ucb_scores(theta, Vinv, beta: float, D) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    widths = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", D, Vinv, D), 0.0))
    return D @ theta + math.sqrt(beta) * widths


def select_index(state: BanditState, beta: float, D) -> int:
    D = np.asarray(D, dtype=np.float64)
    if D.shape[0] == 0:
        raise ValueError("decision set is empty")
    return int(np.argmax(ucb_scores(state.theta, state.Vinv, beta, D)))


def select_action(state: BanditState, beta: float, D) -> np.ndarray:
    """UCB action, ties broken by the lowest index."""
    return np.asarray(D, dtype=np.float64)[select_index(state, beta, D)]


def bandit_potential(state: BanditState, cfg: BanditConfig) -> float:
    return weighted_norm_sq(state.theta - cfg.theta_star, state.V)


def apply_feedback(state: BanditState, x, eps: float, cfg: BanditConfig) -> BanditState:
    """Deterministic part of a round: update with noise ``eps`` already drawn."""
    x = np.asarray(x, dtype=np.float64)
    eta = cfg.eta
    y = float(cfg.theta_star @ x) + eps
    u = state.Vinv @ x
    quad = eta * float(x @ u)
    theta = state.theta + eta * (y - float(state.theta @ x)) * u
    V = state.V + eta * np.outer(x, x)
    Vinv = sherman_morrison(state.Vinv, x, x, scale=eta)
    new = BanditState(
        theta, V, Vinv, state.t + 1, state.cumulative_regret,
        state.potential_history, state.quad_form_history,
    )
    state.quad_form_history.append(quad)
    state.potential_history.append(bandit_potential(new, cfg))
    return new


def bandit_step(state: BanditState, x, cfg: BanditConfig, rng: np.random.Generator) -> BanditState:
    return apply_feedback(state, x, float(rng.uniform(-1.0, 1.0)), cfg)


def recursion_noise(state: BanditState, x, eps: float, cfg: BanditConfig) -> float:
    """``N_t`` in ``X_t <= X_{t-1} + N_t`` for the round about to be played from ``state``."""
    x = np.asarray(x, dtype=np.float64)
    eta = cfg.eta
    s = float((state.theta - cfg.theta_star) @ x)
    q = float(x @ state.Vinv @ x)
    return 2 * eta * eps * s - 2 * eta**3 * eps * s * q * q + 2 * eps * eps * eta * eta * q


def elliptical_sandwich(state: BanditState, cfg: BanditConfig) -> tuple[float, float, float, float]:
    """``(log det V_t/det V_0, sum eta ||x||^2_{V^-1}, 2 log det ratio, 2 d log(1 + eta t L^2/(d lam)))``."""
    _, logdet = np.linalg.slogdet(state.V)
    lhs = float(logdet - cfg.d * math.log(cfg.lam))
    mid = float(sum(state.quad_form_history))
    rhs2 = 2 * cfg.d * math.log(1 + cfg.eta * state.t * cfg.L**2 / (cfg.d * cfg.lam))
    return lhs, mid, 2 * lhs, rhs2


def bandit_deviation(cfg: BanditConfig, T1: int, Lambda: float, delta_p: float) -> float:
    """``sqrt(144 eta d l Lam log(1/d')) + 16 eta d l sqrt(log(1/d'))`` with ``l = log(1 + eta T1 L^2/(d lam))``."""
    ell = math.log(1 + cfg.eta * T1 * cfg.L**2 / (cfg.d * cfg.lam))
    log_inv = math.log(1 / delta_p)
    return math.sqrt(144 * cfg.eta * cfg.d * ell * Lambda * log_inv) + 16 * cfg.eta * cfg.d * ell * math.sqrt(log_inv)


def regret_accounting(D, theta_star, x_chosen) -> float:
    """``<x* - x, theta*>`` against the best action in ``D``."""
    D = np.asarray(D, dtype=np.float64)
    rewards = D @ np.asarray(theta_star, dtype=np.float64)
    return float(rewards.max() - np.asarray(x_chosen, dtype=np.float64) @ theta_star)


def bandit_bounds(cfg: BanditConfig) -> dict:
    ell = log_ratio(cfg)
    inner = max(cfg.L_star**2 * cfg.L**2, cfg.d * ell * math.log(1 / cfg.delta))
    return {
        "potential_threshold": beta_t(cfg),
        "regret_bound": 34 * math.sqrt(2 * cfg.d * cfg.T * inner * ell),
    }


def play_reference(cfg: BanditConfig, actions, eps, horizon: int | None = None) -> BanditState:
    """Play ``horizon`` rounds with pre-drawn action sets and noise (slow, for cross-checks)."""
    beta = beta_t(cfg)
    state = BanditState.initial(cfg)
    n = len(eps) if horizon is None else horizon
    for t in range(n):
        D = actions[t]
        x = select_action(state, beta, D)
        regret = regret_accounting(D, cfg.theta_star, x)
        state = apply_feedback(state, x, float(eps[t]), cfg)
        state.cumulative_regret += regret
    return state


# ------------------------------------------------------------ fast kernel


@numba.njit(cache=True, nogil=True)
def _bandit_run(theta_star, actions, eps, lam, eta, L, beta, threshold, ckpts, out):
    """Play all rounds; ``out`` rows per checkpoint are (X, regret, lhs, mid, rhs2).

    Returns counters ``(first threshold violation or -1, max X, quad-cap
    violations, recursion violations, UCB-dominance violations, max inverse
    error, final X, final regret)``.
    """
    T, K, d = actions.shape
    theta = np.zeros(d)
    V = lam * np.eye(d)
    Vinv = np.eye(d) / lam
    sb = math.sqrt(beta)
    logdet0 = d * math.log(lam)
    regret = 0.0
    mid = 0.0
    e = theta - theta_star
    X = lam * np.dot(e, e)
    first = -1
    xmax = X
    quad_bad = 0
    rec_bad = 0
    ucb_bad = 0
    inv_err = 0.0
    c = 0
    u = np.empty(d)
    while c < ckpts.shape[0] and ckpts[c] == 0:
        out[c, 0] = X
        out[c, 1] = 0.0
        out[c, 2] = 0.0
        out[c, 3] = 0.0
        out[c, 4] = 0.0
        c += 1
    for i in range(T):
        t = i + 1
        best_score = -np.inf
        best = 0
        best_reward = -np.inf
        for a in range(K):
            x = actions[i, a]
            q = 0.0
            for r in range(d):
                acc = 0.0
                for s in range(d):
                    acc += Vinv[r, s] * x[s]
                q += x[r] * acc
            score = np.dot(x, theta) + sb * math.sqrt(max(q, 0.0))
            if score > best_score:
                best_score = score
                best = a
            rw = np.dot(x, theta_star)
            if rw > best_reward:
                best_reward = rw
        x = actions[i, best]
        inst = best_reward - np.dot(x, theta_star)
        for r in range(d):
            acc = 0.0
            for s in range(d):
                acc += Vinv[r, s] * x[s]
            u[r] = acc
        q = np.dot(x, u)
        for r in range(d):
            e[r] = theta[r] - theta_star[r]
        ell = 0.0
        for r in range(d):
            for s in range(d):
                ell += e[r] * V[r, s] * e[s]
        if ell <= beta and inst > 2.0 * sb * math.sqrt(max(q, 0.0)) + 1e-12:
            ucb_bad += 1
        quad = eta * q
        if quad > 1.0 + 1e-12:
            quad_bad += 1
        s_val = np.dot(e, x)
        ep = eps[i]
        noise = 2 * eta * ep * s_val - 2 * eta**3 * ep * s_val * q * q + 2 * ep * ep * eta * eta * q
        resid = np.dot(theta_star, x) + ep - np.dot(theta, x)
        for r in range(d):
            theta[r] += eta * resid * u[r]
        f = eta / (1.0 + eta * q)
        for r in range(d):
            for s in range(d):
                V[r, s] += eta * x[r] * x[s]
                Vinv[r, s] -= f * u[r] * u[s]
        for r in range(d):
            e[r] = theta[r] - theta_star[r]
        Xn = 0.0
        for r in range(d):
            for s in range(d):
                Xn += e[r] * V[r, s] * e[s]
        if Xn > X + noise + 1e-9 * (1.0 + X):
            rec_bad += 1
        X = Xn
        regret += inst
        mid += quad
        if X > xmax:
            xmax = X
        if X > threshold and first < 0:
            first = t
        if t % 512 == 0:
            P = V @ Vinv
            for r in range(d):
                P[r, r] -= 1.0
            err = np.max(np.abs(P))
            if err > inv_err:
                inv_err = err
        while c < ckpts.shape[0] and ckpts[c] == t:
            sign, ld = np.linalg.slogdet(V)
            out[c, 0] = X
            out[c, 1] = regret
            out[c, 2] = ld - logdet0
            out[c, 3] = mid
            out[c, 4] = 2 * d * math.log(1 + eta * t * L * L / (d * lam))
            c += 1
    return first, xmax, quad_bad, rec_bad, ucb_bad, inv_err, X, regret


@dataclass(frozen=True)
class BanditRun:
    first_violation: int | None
    max_potential: float
    quad_cap_violations: int
    recursion_violations: int
    ucb_violations: int
    inverse_error: float
    final_x: float
    regret: float
    checkpoint_rows: np.ndarray  # columns: X, regret, lhs, mid, rhs2


def simulate(cfg: BanditConfig, horizon: int, checkpoints, rng: np.random.Generator) -> BanditRun:
    actions = gen_decision_set(cfg, rng, rounds=horizon)
    eps = rng.uniform(-1.0, 1.0, size=horizon)
    return simulate_with(cfg, actions, eps, checkpoints)


def simulate_with(cfg: BanditConfig, actions, eps, checkpoints) -> BanditRun:
    ck = np.asarray(checkpoints, dtype=np.int64)
    out = np.full((ck.shape[0], 5), np.nan)
    beta = beta_t(cfg)
    res = _bandit_run(
        cfg.theta_star, np.ascontiguousarray(actions, dtype=np.float64),
        np.asarray(eps, dtype=np.float64), cfg.lam, cfg.eta, cfg.L, beta, beta, ck, out,
    )
    first, xmax, qb, rb, ub, ie, xf, reg = res
    return BanditRun(
        None if first < 0 else int(first), float(xmax), int(qb), int(rb), int(ub),
        float(ie), float(xf), float(reg), out,
    )
