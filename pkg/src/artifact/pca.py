"""Oja's streaming k-PCA on an axis-aligned distribution over the unit sphere.

Samples are ``+-e_i`` with ``P(i) = lambda_i``, so the covariance is
``diag(lambda)`` and the top-k eigenspace is spanned by the first k basis
vectors. ``V`` and ``Z`` are the first k and last d-k basis columns, and the
potential is ``X = ||Y||_F^2`` with ``Y = Z^T W (V^T W)^{-1}``.

The update is ``W <- (I + eta x x^T) W``, which pushes ``W`` towards the top
eigenspace; the Sherman-Morrison recursion for ``Y`` below is derived for
this sign.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, Sequence

import numba
import numpy as np

from .concentration import MomentProfile
from .matrix_kernels import SingularMatrixError, frobenius_norm_sq, solve_small
from .sgd import clamped_loglog

MAX_ETA = 0.25
SUM_TOL = 1e-9
RENORM_LIMIT = 1e8


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple[float, ...]
    k: int

    def __post_init__(self):
        lam = tuple(float(v) for v in self.eigenvalues)
        object.__setattr__(self, "eigenvalues", lam)
        if not 1 <= self.k < len(lam):
            raise ValueError("need 1 <= k < d")
        if any(v < 0 for v in lam) or any(a < b for a, b in zip(lam, lam[1:])):
            raise ValueError("eigenvalues must be non-negative and non-increasing")
        if abs(sum(lam) - 1.0) > SUM_TOL:
            raise ValueError(f"eigenvalues must sum to 1, got {sum(lam)}")
        if self.gap <= 0:
            raise ValueError("need a positive eigengap lambda_k - lambda_{k+1}")

    @classmethod
    def default(cls) -> "Spectrum":
        return cls((0.30, 0.25) + (0.075,) * 6, 2)

    @classmethod
    def parse(cls, text: str, k: int) -> "Spectrum":
        """Comma-separated eigenvalues; renormalised with a warning if they do not sum to 1."""
        vals = [float(v) for v in text.split(",") if v.strip()]
        total = sum(vals)
        if total <= 0:
            raise ValueError("eigenvalues must have a positive sum")
        if abs(total - 1.0) > SUM_TOL:
            warnings.warn(f"eigenvalues sum to {total}; renormalising", stacklevel=2)
            vals = [v / total for v in vals]
        return cls(tuple(vals), k)

    @property
    def d(self) -> int:
        return len(self.eigenvalues)

    @property
    def gap(self) -> float:
        return self.eigenvalues[self.k - 1] - self.eigenvalues[self.k]

    @property
    def lambda_top(self) -> float:
        return float(sum(self.eigenvalues[: self.k]))

    @property
    def top(self) -> np.ndarray:
        return np.asarray(self.eigenvalues[: self.k])

    @property
    def bottom(self) -> np.ndarray:
        return np.asarray(self.eigenvalues[self.k :])


@dataclass(frozen=True)
class OjaState:
    W: np.ndarray
    Y: np.ndarray
    t: int = 0


def sphere_sample(spec: Spectrum, rng: np.random.Generator) -> np.ndarray:
    i = rng.choice(spec.d, p=spec.eigenvalues)
    x = np.zeros(spec.d)
    x[i] = 1.0 if rng.random() < 0.5 else -1.0
    return x


def check_eta(eta: float) -> None:
    if not 0.0 < eta <= MAX_ETA:
        raise ValueError(f"learning rate must lie in (0, 1/4], got {eta}")


def oja_step(W, x, eta: float) -> np.ndarray:
    """``(I + eta x x^T) W``."""
    check_eta(eta)
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return W + eta * np.outer(x, x @ W)


def pca_y_direct(W, spec: Spectrum) -> np.ndarray:
    """``Z^T W (V^T W)^{-1}`` by solving ``(V^T W)^T Y^T = (Z^T W)^T``."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (spec.d, spec.k):
        raise ValueError(f"W must be {spec.d}x{spec.k}")
    VW, ZW = W[: spec.k], W[spec.k :]
    return solve_small(VW.T, ZW.T).T


def pca_potential_direct(W, spec: Spectrum) -> float:
    """``||Z^T W (V^T W)^{-1}||_F^2``; raises SingularMatrixError for singular ``V^T W``."""
    return frobenius_norm_sq(pca_y_direct(W, spec))


def pca_terms(W, x, spec: Spectrum) -> tuple[float, np.ndarray, np.ndarray]:
    """``a = x^T P V^T x``, ``B = V^T x x^T P``, ``C = Z^T x x^T P`` with ``P = W (V^T W)^{-1}``.

    ``B`` is rank one, so ``|a| = |tr B| <= ||B||_F``; equality holds when
    ``x^T P`` is parallel to ``V^T x``, e.g. for the axis samples.
    """
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    VW = W[: spec.k]
    # x^T P = x^T W (V^T W)^{-1}, i.e. solve (V^T W)^T z = W^T x
    xP = solve_small(VW.T, W.T @ x)
    vx, zx = x[: spec.k], x[spec.k :]
    return float(xP @ vx), np.outer(vx, xP), np.outer(zx, xP)


def y_recursion(Y, a: float, B, C, eta: float) -> np.ndarray:
    """``Y - c Y B + c C`` with ``c = eta / (1 + eta a)``."""
    denom = 1.0 + eta * a
    if abs(denom) < 1e-12:
        raise SingularMatrixError("1 + eta a vanishes")
    c = eta / denom
    Y = np.asarray(Y, dtype=np.float64)
    return Y - c * (Y @ B) + c * C


def pca_incremental_update(state: OjaState, x, eta: float, spec: Spectrum) -> OjaState:
    a, B, C = pca_terms(state.W, x, spec)
    W = oja_step(state.W, x, eta)
    scale = np.linalg.norm(W)
    if scale > RENORM_LIMIT:
        # Y is invariant to rescaling W
        W = W / scale
    return OjaState(W, y_recursion(state.Y, a, B, C, eta), state.t + 1)


def linearization_noise(Y, a: float, B, C, eta: float, spec: Spectrum) -> float:
    """Noise ``N_t`` of the one-step bound ``X_t <= (1 - 2 eta gap) X_{t-1} + N_t``.

    The conditional expectations use ``E[tr(Y^T Y B)] = tr(Y^T Y Sigma_top)`` and
    ``E[tr(Y^T C)] = tr(Y^T Sigma_bottom Y)``.
    """
    Y = np.asarray(Y, dtype=np.float64)
    YtY = Y.T @ Y
    tr_yyb = float(np.trace(YtY @ B))
    tr_yc = float(np.sum(Y * C))
    e_yyb = float(np.sum(np.diag(YtY) * spec.top))
    e_yc = float(np.sum(spec.bottom[:, None] * Y * Y))
    denom = 1.0 + eta * a
    YB = Y @ B
    return (
        2 * eta * (-tr_yyb + e_yyb + tr_yc - e_yc)
        + (2 * eta * eta * a / denom) * (tr_yyb - tr_yc)
        + (2 * eta * eta / denom**2) * (float(np.sum(YB * YB)) + float(np.sum(C * C)))
    )


def local_init(spec: Spectrum, x0: float = 0.5) -> np.ndarray:
    """``W_0 = V + alpha Z S`` with ``S`` pairing v-column i with z-column i, so ``X_0 = x0``."""
    if spec.d - spec.k < spec.k:
        raise ValueError("local initialisation needs d - k >= k")
    alpha = math.sqrt(x0 / spec.k)
    W = np.zeros((spec.d, spec.k))
    for i in range(spec.k):
        W[i, i] = 1.0
        W[spec.k + i, i] = alpha
    return W


def initial_state(spec: Spectrum, x0: float = 0.5) -> OjaState:
    W = local_init(spec, x0)
    return OjaState(W, pca_y_direct(W, spec))


def moment_profile(lambda_top: float, gap: float, gamma: float, T0: int) -> MomentProfile:
    """``B = 40 eta / q^s``, ``mu = 56 eta^2 lam / q^s``, ``sigma^2 = eta^2 lam (1136 Lam + 512 eta^2) / q^{2s}``.

    Here ``q = 1 - gamma``, ``s = t - T0`` and ``eta = gamma / (2 gap)``.
    Evaluating at a threshold above 1 raises.
    """
    eta = gamma / (2 * gap)
    check_eta(eta)
    q = 1.0 - gamma

    def guard(Lam):
        if not 0 < Lam <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {Lam}")

    def bounded_diff(t, Lam):
        guard(Lam)
        return 40 * eta / q ** (t - T0)

    def cond_mean(t, Lam):
        guard(Lam)
        return 56 * eta * eta * lambda_top / q ** (t - T0)

    def cond_var(t, Lam):
        guard(Lam)
        return eta * eta * lambda_top * (1136 * Lam + 512 * eta * eta) / q ** (2 * (t - T0))

    return MomentProfile(bounded_diff, cond_mean, cond_var, start_time=T0)


def pca_moment_profile(spec: Spectrum, gamma: float, T0: int) -> MomentProfile:
    return moment_profile(spec.lambda_top, spec.gap, gamma, T0)


def pca_bound(t: int, delta: float, guarantee: Literal["last", "uniform"], spec: Spectrum) -> float:
    if t < 1:
        raise ValueError("t must be at least 1")
    scale = spec.lambda_top / (spec.gap**2 * t)
    if guarantee == "last":
        return 2000 * scale * math.log(1 / delta)
    if guarantee == "uniform":
        return 30000 * scale * (math.log(1 / delta) + 2 * clamped_loglog(t))
    raise ValueError(f"unknown guarantee {guarantee!r}")


# ------------------------------------------------------------ fast kernel


@numba.njit(cache=True, nogil=True)
def _oja_axis_run(Y, k, idx, bounds, etas, thresholds, ckpts, ck_out):
    """Run Y-only Oja updates for axis samples ``e_idx``.

    A top-space sample i < k scales column i of Y by 1/(1+eta); a bottom
    sample j >= k scales row j-k by (1+eta). ``bounds[b]`` is the last step of
    block b (blocks start at 1); steps past the last block are not run.
    Returns ``(first violation step or -1, max X/threshold)``.
    """
    T = idx.shape[0]
    rows, cols = Y.shape
    blk = 1
    c = 0
    first = -1
    worst = 0.0
    while c < ckpts.shape[0] and ckpts[c] == 0:
        ck_out[c] = np.sum(Y * Y)
        c += 1
    for i in range(T):
        t = i + 1
        while blk < bounds.shape[0] and t > bounds[blk]:
            blk += 1
        if blk >= bounds.shape[0]:
            break
        eta = etas[blk]
        j = idx[i]
        if j < k:
            f = 1.0 / (1.0 + eta)
            for r in range(rows):
                Y[r, j] *= f
        else:
            f = 1.0 + eta
            for q in range(cols):
                Y[j - k, q] *= f
        x = 0.0
        for r in range(rows):
            for q in range(cols):
                x += Y[r, q] * Y[r, q]
        ratio = x / thresholds[blk]
        if ratio > worst:
            worst = ratio
        if ratio > 1.0 and first < 0:
            first = t
        while c < ckpts.shape[0] and ckpts[c] == t:
            ck_out[c] = x
            c += 1
    return first, worst


def sample_indices(spec: Spectrum, n: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(spec.eigenvalues)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right").astype(np.int64)


@dataclass(frozen=True)
class AxisRun:
    first_violation: int | None
    worst_ratio: float
    checkpoint_x: np.ndarray
    final_x: float
    degenerate: bool


def simulate_axis(
    spec: Spectrum,
    bounds: Sequence[int],
    etas: Sequence[float],
    thresholds: Sequence[float],
    horizon: int,
    checkpoints: Sequence[int],
    rng: np.random.Generator,
    x0: float = 0.5,
) -> AxisRun:
    """Fast run with block-constant step sizes and thresholds (index 0 unused)."""
    Y = pca_y_direct(local_init(spec, x0), spec).copy()
    idx = sample_indices(spec, horizon, rng)
    ck = np.asarray(checkpoints, dtype=np.int64)
    out = np.full(ck.shape[0], np.nan)
    first, worst = _oja_axis_run(
        Y,
        spec.k,
        idx,
        np.asarray(bounds, dtype=np.int64),
        np.asarray(etas, dtype=np.float64),
        np.asarray(thresholds, dtype=np.float64),
        ck,
        out,
    )
    final = float(np.sum(Y * Y))
    return AxisRun(None if first < 0 else int(first), float(worst), out, final, not math.isfinite(final))


def simulate_reference(spec: Spectrum, xs, eta_of_t, x0: float = 0.5, check_every: int = 1000):
    """Full ``W``/``Y`` run for explicit samples, cross-checking ``Y`` every ``check_every`` steps.

    Returns ``(X path, worst relative Y drift)``.
    """
    state = initial_state(spec, x0)
    X = [frobenius_norm_sq(state.Y)]
    drift = 0.0
    for x in xs:
        state = pca_incremental_update(state, x, eta_of_t(state.t + 1), spec)
        X.append(frobenius_norm_sq(state.Y))
        if state.t % check_every == 0:
            drift = max(drift, relative_drift(state, spec))
    return np.array(X), drift


def relative_drift(state: OjaState, spec: Spectrum) -> float:
    direct = pca_y_direct(state.W, spec)
    scale = np.linalg.norm(direct)
    err = np.linalg.norm(state.Y - direct)
    return float(err / scale) if scale > 0 else float(err)
