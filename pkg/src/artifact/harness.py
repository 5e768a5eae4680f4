"""Seeded Monte Carlo runs of the four dynamics and bound-violation statistics.

Every trial draws from its own generator seeded by a 64-bit mix of
``(base_seed, trial_index)``, so a report depends only on the ExperimentSpec and never
on how trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from scipy import stats

from . import bandit, pca, sgd, toy
from .concentration import ThresholdSequence, pullout_witness_check
from .schedules import pca_uniform_plan, sgd_interval_deviation, sgd_uniform_plan

MASK64 = (1 << 64) - 1
CONFIDENCE = 0.95
DYNAMICS = ("toy", "sgd", "pca", "bandit")
DEFAULT_HORIZON = {"toy": 10_000, "sgd": 10_000, "bandit": 10_000}


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def trial_seed(base_seed: int, trial_index: int) -> int:
    return splitmix64((base_seed & MASK64) ^ splitmix64(trial_index))


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """``{1..10} U {ceil(10^(k/8))}`` up to the horizon, plus the horizon itself."""
    pts = set(range(1, min(10, horizon) + 1))
    k = 8
    while True:
        v = 10 ** (k / 8)
        t = round(v) if abs(v - round(v)) < 1e-9 else math.ceil(v)
        if t > horizon:
            break
        pts.add(t)
        k += 1
    pts.add(horizon)
    return tuple(sorted(pts))


def clopper_pearson_upper(k: int, n: int, level: float = CONFIDENCE, tol: float = 1e-13) -> float:
    """Exact one-sided upper confidence bound for a binomial proportion.

    Bisects for ``p`` with ``P(Bin(n, p) <= k) = 1 - level``.
    """
    if n < 1 or not 0 <= k <= n:
        raise ValueError("need n >= 1 and 0 <= k <= n")
    if k == n:
        return 1.0
    lo, hi = k / n, 1.0
    target = 1.0 - level
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stats.binom.cdf(k, n, mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class ExperimentSpec:
    dynamic: Literal["toy", "sgd", "pca", "bandit"]
    guarantee: Literal["last", "uniform"] = "uniform"
    trials: int = 100
    horizon: int | None = None
    delta: float = 0.1
    base_seed: int = 0
    config: dict = field(default_factory=dict)
    checkpoints: tuple[int, ...] | None = None
    workers: int = 1

    def __post_init__(self):
        if self.dynamic not in DYNAMICS:
            raise ValueError(f"unknown dynamic {self.dynamic!r}")
        if self.guarantee not in ("last", "uniform"):
            raise ValueError(f"unknown guarantee {self.guarantee!r}")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        horizon = self.horizon
        if horizon is None:
            horizon = self._pca_plan().boundaries[-1] if self.dynamic == "pca" else DEFAULT_HORIZON[self.dynamic]
        if horizon < 1:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "horizon", int(horizon))
        if self.checkpoints is None:
            object.__setattr__(self, "checkpoints", default_checkpoints(self.horizon))
        else:
            object.__setattr__(self, "checkpoints", tuple(sorted(set(int(c) for c in self.checkpoints))))
        self.bound_fn()  # validate the dynamic config eagerly

    # -- dynamic-specific configuration

    def sgd_config(self) -> sgd.SgdConfig:
        keys = ("d", "lam", "G", "R", "c", "w_star")
        return sgd.SgdConfig(**{k: v for k, v in self.config.items() if k in keys})

    def spectrum(self) -> pca.Spectrum:
        spec = self.config.get("spectrum")
        if spec is None:
            return pca.Spectrum.default()
        return spec if isinstance(spec, pca.Spectrum) else pca.Spectrum(tuple(spec), self.config.get("k", 2))

    def _pca_plan(self):
        s = self.spectrum()
        return pca_uniform_plan(s.lambda_top, s.gap, self.delta, self.config.get("intervals", 2))

    def bandit_config(self) -> bandit.BanditConfig:
        keys = ("d", "K", "lam", "L", "L_star", "eta", "theta_star")
        kwargs = {k: v for k, v in self.config.items() if k in keys}
        return bandit.BanditConfig(T=self.horizon, delta=self.delta, **kwargs)

    @cached_property
    def bound_array(self) -> np.ndarray:
        """``r(t, delta)`` for ``t = 0..T``; entry 0 repeats ``r(1, delta)``."""
        f = self.bound_fn()
        return np.array([f(t) for t in range(self.horizon + 1)])

    def bound_fn(self) -> Callable[[int], float]:
        """The bound ``r(t, delta)`` checked by this experiment."""
        d, g = self.delta, self.guarantee
        if self.dynamic == "toy":
            return lambda t: toy.toy_bound(max(t, 1), d)
        if self.dynamic == "sgd":
            cfg = self.sgd_config()
            return lambda t: sgd.sgd_bound(max(t, 1), d, g, cfg)
        if self.dynamic == "pca":
            s = self.spectrum()
            if g == "last":
                return lambda t: pca.pca_bound(max(t, 1), d, "last", s)
            plan = self._pca_plan()
            if plan.boundaries[-1] < self.horizon:
                raise ValueError(f"horizon {self.horizon} exceeds the plan's last boundary {plan.boundaries[-1]}")
            return lambda t: plan.thresholds[max(plan.interval_of(t), 1)]
        beta = bandit.beta_t(self.bandit_config())
        return lambda t: beta


@dataclass
class Trajectory:
    trial: int
    seed: int
    checkpoint_x: np.ndarray
    violated: bool
    first_violation_t: int | None
    final_x: float
    degenerate: bool = False
    path: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _first_exceed(path: np.ndarray, bound: np.ndarray, start: int) -> int | None:
    hits = np.flatnonzero(path[start:] > bound[start:])
    return int(hits[0]) + start if hits.size else None


def _path_trial(spec: ExperimentSpec, path: np.ndarray, start: int) -> tuple[bool, int | None]:
    T = spec.horizon
    if spec.guarantee == "last":
        bad = path[T] > spec.bound_fn()(T)
        return bool(bad), (T if bad else None)
    first = _first_exceed(path, spec.bound_array, start)
    return first is not None, first


def _sgd_extras(spec: ExperimentSpec, cfg: sgd.SgdConfig, X: np.ndarray, N: np.ndarray) -> dict:
    T = spec.horizon
    t = np.arange(1, T + 1)
    rhs = (1 - 2.0 / t) * X[:-1] + N
    recursion_bad = int(np.sum(X[1:] > rhs + 1e-12 * (1 + np.abs(X[:-1]))))
    cap_bad = int(np.sum(X > cfg.potential_cap * (1 + 1e-12)))
    plan = sgd_uniform_plan(cfg.G, cfg.lam, spec.delta, max(1, int(math.log2(max(T, 100) / 100)) + 1))
    witnesses = 0
    intervals = 0
    for i in range(2, plan.num_intervals + 1):
        T0, T1 = plan.boundaries[i - 1], plan.boundaries[i]
        if T1 > T:
            break
        Lam = plan.thresholds[i]
        dev = sgd_interval_deviation(cfg.G, cfg.lam, T0, T1, Lam, plan.confidences[i])
        M = sgd.minor_process(N, T0, T1)
        witnesses += pullout_witness_check([(X[T0 : T1 + 1], M)], ThresholdSequence("uniform", Lam), dev)
        intervals += 1
    return {
        "recursion_violations": recursion_bad,
        "cap_violations": cap_bad,
        "pullout_witnesses": witnesses,
        "pullout_intervals": intervals,
    }


def run_trial(spec: ExperimentSpec, trial_index: int) -> Trajectory:
    if not 0 <= trial_index < spec.trials:
        raise ValueError("trial index out of range")
    seed = trial_seed(spec.base_seed, trial_index)
    rng = np.random.default_rng(seed)
    ck = np.asarray(spec.checkpoints, dtype=np.int64)
    T = spec.horizon

    if spec.dynamic == "toy":
        path = toy.simulate(spec.config.get("x0", toy.DEFAULT_X0), T, rng)
        violated, first = _path_trial(spec, path, 1)
        return Trajectory(trial_index, seed, path[ck], violated, first, float(path[T]), path=path)

    if spec.dynamic == "sgd":
        cfg = spec.sgd_config()
        X, N = sgd.simulate(cfg, T, rng)
        start = 1 if spec.guarantee == "last" else min(sgd.MIN_START_TIME, T)
        violated, first = _path_trial(spec, X, start)
        return Trajectory(
            trial_index, seed, X[ck], violated, first, float(X[T]), path=X, extras=_sgd_extras(spec, cfg, X, N)
        )

    if spec.dynamic == "pca":
        s = spec.spectrum()
        plan = spec._pca_plan()
        etas = [math.nan] + [g / (2 * s.gap) for g in plan.rates[1:]]
        run = pca.simulate_axis(
            s, plan.boundaries, etas, plan.thresholds, T, ck, rng, x0=spec.config.get("x0", 0.5)
        )
        if spec.guarantee == "uniform":
            violated, first = run.first_violation is not None, run.first_violation
        else:
            violated = run.final_x > spec.bound_fn()(T)
            first = T if violated else None
        return Trajectory(
            trial_index, seed, run.checkpoint_x, bool(violated) and not run.degenerate, first,
            run.final_x, degenerate=run.degenerate, extras={"worst_ratio": run.worst_ratio},
        )

    cfg = spec.bandit_config()
    run = bandit.simulate(cfg, T, ck, rng)
    if spec.guarantee == "uniform":
        violated, first = run.first_violation is not None, run.first_violation
    else:
        violated = run.final_x > bandit.beta_t(cfg)
        first = T if violated else None
    rows = run.checkpoint_rows
    lhs, mid, rhs2 = rows[:, 2], rows[:, 3], rows[:, 4]
    tol = 1e-9 * (1 + np.abs(rhs2))
    sandwich_ok = bool(np.all((lhs <= mid + tol) & (mid <= 2 * lhs + tol) & (2 * lhs <= rhs2 + tol)))
    return Trajectory(
        trial_index, seed, rows[:, 0].copy(), violated, first, run.final_x,
        extras={
            "regret": run.regret,
            "regret_at": dict(zip(spec.checkpoints, rows[:, 1].tolist())),
            "sandwich_ok": sandwich_ok,
            "quad_cap_violations": run.quad_cap_violations,
            "recursion_violations": run.recursion_violations,
            "ucb_violations": run.ucb_violations,
            "inverse_error": run.inverse_error,
        },
    )


@dataclass(frozen=True)
class CheckpointStat:
    t: int
    mean: float
    p50: float
    p90: float
    max: float
    bound: float


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    violated: bool
    first_violation_t: int | None
    final_x: float


@dataclass
class VerificationReport:
    spec: ExperimentSpec
    violations: int
    degenerate_trials: int
    empirical_failure: float
    failure_upper: float
    checkpoints: list[CheckpointStat]
    trials: list[TrialRow]
    regret: dict | None
    trajectories: list[Trajectory]

    @property
    def verdict(self) -> bool:
        return self.failure_upper < self.spec.delta and self.degenerate_trials == 0

    def summary(self) -> str:
        s = self.spec
        lines = [
            f"dynamic={s.dynamic} guarantee={s.guarantee} trials={s.trials} horizon={s.horizon} delta={s.delta}",
            f"violations={self.violations} degenerate={self.degenerate_trials} "
            f"failure={self.empirical_failure:.4g} upper95={self.failure_upper:.4g}",
        ]
        if self.regret:
            lines.append(
                f"regret mean={self.regret['mean']:.6g} bound={self.regret['bound']:.6g} "
                f"within_bound={self.regret['within_bound']}/{s.trials}"
            )
        lines.append("verdict=" + ("PASS" if self.verdict else "FAIL"))
        return "\n".join(lines)


def _aggregate(spec: ExperimentSpec, trajs: list[Trajectory]) -> VerificationReport:
    violations = sum(t.violated for t in trajs)
    degenerate = sum(t.degenerate for t in trajs)
    n = len(trajs)
    good = [t.checkpoint_x for t in trajs if not t.degenerate]
    mat = np.vstack(good) if good else np.empty((0, len(spec.checkpoints)))
    bfn = spec.bound_fn()
    stats_rows = []
    for j, t in enumerate(spec.checkpoints):
        col = mat[:, j] if mat.size else np.array([np.nan])
        stats_rows.append(
            CheckpointStat(
                t,
                float(np.mean(col)),
                float(np.percentile(col, 50)),
                float(np.percentile(col, 90)),
                float(np.max(col)),
                float(bfn(t)),
            )
        )
    regret = None
    if spec.dynamic == "bandit":
        cfg = spec.bandit_config()
        bound = bandit.bandit_bounds(cfg)["regret_bound"]
        finals = np.array([t.extras["regret"] for t in trajs])
        regret = {
            "mean": float(finals.mean()),
            "max": float(finals.max()),
            "bound": bound,
            "within_bound": int(np.sum(finals <= bound)),
            "mean_at": {
                c: float(np.mean([t.extras["regret_at"][c] for t in trajs])) for c in spec.checkpoints
            },
        }
    rows = [TrialRow(t.trial, t.seed, t.violated, t.first_violation_t, t.final_x) for t in trajs]
    return VerificationReport(
        spec, violations, degenerate, violations / n, clopper_pearson_upper(violations, n),
        stats_rows, rows, regret, trajs,
    )


def run_experiment(spec: ExperimentSpec) -> VerificationReport:
    idx = range(spec.trials)
    if spec.workers == 1:
        trajs = [run_trial(spec, i) for i in idx]
    else:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            trajs = list(pool.map(lambda i: run_trial(spec, i), idx))
    return _aggregate(spec, trajs)


def emit_csv(report: VerificationReport, path) -> tuple[str, str]:
    """Write ``<path>.checkpoints.csv`` and ``<path>.trials.csv``; returns both paths."""
    ck_path, tr_path = f"{path}.checkpoints.csv", f"{path}.trials.csv"
    with open(ck_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "p50", "p90", "max", "bound"])
        for c in report.checkpoints:
            w.writerow([c.t, repr(c.mean), repr(c.p50), repr(c.p90), repr(c.max), repr(c.bound)])
    with open(tr_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed", "violated", "first_violation_t", "final_x"])
        for r in report.trials:
            first = "" if r.first_violation_t is None else r.first_violation_t
            w.writerow([r.trial, r.seed, int(r.violated), first, repr(r.final_x)])
    return ck_path, tr_path
