"""Recursion unfolding, moment profiles, deviations and stopping times.

A process obeying ``X_t <= H_t X_{t-1} + N_t`` is rewritten as
``X_t <= D_t (X_{T0} + M_t)`` with a deterministic decay product ``D_t`` and an
adapted minor process ``M_t``. Concentration of the stopped minor process is
summarised by a :class:`MomentProfile`; :func:`deviation_bound` turns it into a
high-probability deviation, and :func:`check_improvement` tests whether that
deviation is small enough to pull the stopping time out.

Indexing convention: position 0 of every path is the start time ``T0``.
Empty products are 1 and empty sums are 0. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

MomentFn = Callable[[int, float], float]


@dataclass(frozen=True)
class MomentProfile:
    """Bounds on the stopped minor increments as functions of ``(t, threshold)``.

    Attributes:
        bounded_diff: almost-sure bound on ``|M_{t^tau} - M_{(t-1)^tau}|``.
        cond_mean: bound on the conditional mean of that increment.
        cond_var: bound on its conditional variance.
        start_time: the step ``T0`` the profile is anchored at.
    """

    bounded_diff: MomentFn
    cond_mean: MomentFn
    cond_var: MomentFn
    start_time: int = 0


@dataclass(frozen=True)
class ThresholdSequence:
    """Stopping thresholds ``Lambda_t``.

    ``uniform`` is constant, ``linear`` is ``level / t`` and
    ``inverse-square-scaled`` is ``horizon * level / t**2``. Time 0 is treated
    as time 1 for the two decaying kinds.
    """

    kind: Literal["uniform", "linear", "inverse-square-scaled"]
    level: float
    horizon: int = 1

    def __post_init__(self):
        if self.kind not in ("uniform", "linear", "inverse-square-scaled"):
            raise ValueError(f"unknown threshold kind {self.kind!r}")
        if self.level < 0:
            raise ValueError("threshold level must be non-negative")

    def value(self, t: int) -> float:
        t = max(int(t), 1)
        if self.kind == "uniform":
            return self.level
        if self.kind == "linear":
            return self.level / t
        return self.horizon * self.level / (t * t)

    def values(self, ts: Iterable[int]) -> np.ndarray:
        return np.array([self.value(t) for t in ts], dtype=np.float64)


@dataclass(frozen=True)
class UnfoldedRecursion:
    """``dominating[j] = D_j``, ``minor[j] = M_j`` for j = 0..T with D_0 = 1, M_0 = 0."""

    dominating: np.ndarray
    minor: np.ndarray
    start_value: float

    def reconstruct(self) -> np.ndarray:
        """The path ``D_t (x0 + M_t)``, including the start value at index 0."""
        return self.dominating * (self.start_value + self.minor)


@dataclass(frozen=True)
class StoppingRecord:
    crossing_time: int | None
    thresholds: ThresholdSequence


@dataclass(frozen=True)
class ImprovementReport:
    improvement_ok: bool
    pullout_ok: bool
    first_failing_t: int | None


def unfold_recursion(H: Sequence[float], N: Sequence[float], x0: float) -> UnfoldedRecursion:
    """Unfold ``X_t = H_t X_{t-1} + N_t`` into a decay product and minor sum.

    ``H[j]`` and ``N[j]`` drive the step to time ``j + 1``. Returns arrays of
    length ``len(H) + 1`` so that ``D_t (x0 + M_t)`` reproduces the direct
    iteration exactly in exact arithmetic.
    """
    H = np.asarray(H, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    if H.shape != N.shape or H.ndim != 1:
        raise ValueError("H and N must be 1-d sequences of equal length")
    if np.any(H <= 0):
        raise ValueError("every H_t must be positive")
    D = np.concatenate(([1.0], np.cumprod(H)))
    M = np.concatenate(([0.0], np.cumsum(N / D[1:])))
    return UnfoldedRecursion(dominating=D, minor=M, start_value=float(x0))


def iterate_recursion(H: Sequence[float], N: Sequence[float], x0: float) -> np.ndarray:
    """Directly iterate ``X_t = H_t X_{t-1} + N_t`` (reference for the unfolding)."""
    out = [float(x0)]
    for h, n in zip(H, N):
        out.append(h * out[-1] + n)
    return np.array(out)


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def deviation_bound(
    profile: MomentProfile,
    thresholds: ThresholdSequence,
    T0: int,
    T1: int,
    delta: float,
) -> float:
    """Freedman-type deviation of the stopped minor process over ``(T0, T1]``.

    ``2 max{sqrt(sum sigma^2 * log(1/delta)), max 2 B log(1/delta)} + sum mu``,
    with every moment function evaluated at ``(t, thresholds.value(t))``.
    The variance *sum* sits under the root.
    """
    _check_delta(delta)
    if not T0 < T1:
        raise ValueError("need T0 < T1")
    log_inv = math.log(1.0 / delta)
    var_sum = 0.0
    mean_sum = 0.0
    b_max = 0.0
    for t in range(T0 + 1, T1 + 1):
        lam = thresholds.value(t)
        var_sum += profile.cond_var(t, lam)
        mean_sum += profile.cond_mean(t, lam)
        b_max = max(b_max, profile.bounded_diff(t, lam))
    return 2.0 * max(math.sqrt(var_sum * log_inv), 2.0 * b_max * log_inv) + mean_sum


def first_crossing(trajectory: Sequence[float], thresholds: ThresholdSequence) -> StoppingRecord:
    """First index ``t`` with ``X_t > Lambda_t``, or ``None``."""
    X = np.asarray(trajectory, dtype=np.float64)
    lam = thresholds.values(range(len(X)))
    hits = np.flatnonzero(X > lam)
    return StoppingRecord(int(hits[0]) if hits.size else None, thresholds)


def stopped_increments(M: Sequence[float], tau: StoppingRecord | int | None) -> np.ndarray:
    """Increments of ``M_{t ^ tau}``: ``1{tau >= t} (M_t - M_{t-1})`` for t >= 1."""
    M = np.asarray(M, dtype=np.float64)
    crossing = tau.crossing_time if isinstance(tau, StoppingRecord) else tau
    inc = np.diff(M)
    if crossing is not None:
        t = np.arange(1, len(M))
        inc = np.where(t <= crossing, inc, 0.0)
    return inc


def check_improvement(
    D_product_at: Callable[[int], float],
    A0: float,
    A1: float,
    Lambda: float,
    Delta: float,
    T0: int,
    T1: int,
) -> ImprovementReport:
    """Check the improvement and pull-out conditions on ``(T0, T1]``.

    Improvement: ``D_{T1} (A0 + Delta) <= A1``.
    Pull-out: ``D_t (A0 + Delta) <= Lambda`` for every ``T0 < t <= T1``.
    """
    level = A0 + Delta
    first_fail = None
    for t in range(T0 + 1, T1 + 1):
        if D_product_at(t) * level > Lambda:
            first_fail = t
            break
    return ImprovementReport(
        improvement_ok=D_product_at(T1) * level <= A1,
        pullout_ok=first_fail is None,
        first_failing_t=first_fail,
    )


def pullout_witness_check(
    trajectories: Iterable[tuple[Sequence[float], Sequence[float]]],
    thresholds: ThresholdSequence,
    Delta: float,
) -> int:
    """Count paths where the running max of ``M`` stays within ``Delta`` yet ``X`` crosses.

    Each item is ``(X path, M path)`` aligned in time from the start index.
    """
    violations = 0
    for X, M in trajectories:
        X = np.asarray(X, dtype=np.float64)
        M = np.asarray(M, dtype=np.float64)
        if X.shape != M.shape:
            raise ValueError("X and M paths must be aligned")
        controlled = np.maximum.accumulate(M) <= Delta
        crossed = X > thresholds.values(range(len(X)))
        if np.any(controlled & crossed):
            violations += 1
    return violations
