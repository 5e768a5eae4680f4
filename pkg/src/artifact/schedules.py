"""Interval analyses: level ladders, confidence splitting and concrete plans.

An interval plan chops time into blocks ``(t_{i-1}, t_i]``. Inside block ``i``
the process starts below ``a_{i-1}``, is stopped at threshold ``Lambda_i`` and
must end below ``a_i`` with failure probability ``delta_i``. The checks in
:func:`verify_plan` are the pull-out condition ``a_{i-1} + Delta_i < Lambda_i``
and the improvement condition ``decay_i * Lambda_i < a_i``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

SGD_FIRST_BOUNDARY = 100
SGD_RATE_CONSTANT = 1000.0
PCA_UNIFORM_CONSTANT = 29500.0
PCA_LAST_CONSTANT = 100000.0
PCA_LAST_THRESHOLD_CONSTANT = 1000.0
MAX_PCA_LEARNING_RATE = 0.25


class ConfigurationError(ValueError):
    """A plan whose parameters break a precondition of the analysis."""


@dataclass(frozen=True)
class IntervalPlan:
    """Sequences indexed by interval; entry 0 holds the start values.

    ``boundaries[i] = t_i``, ``levels[i] = a_i``, ``confidences[i] = delta_i``,
    ``thresholds[i] = Lambda_i`` and ``rates[i] = gamma_i`` (NaN where the
    dynamic has no per-interval rate). Index 0 of ``confidences``,
    ``thresholds`` and ``rates`` is unused and stored as NaN.
    """

    dynamic: str
    boundaries: tuple[int, ...]
    levels: tuple[float, ...]
    confidences: tuple[float, ...]
    thresholds: tuple[float, ...]
    rates: tuple[float, ...]
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.boundaries)
        for name in ("levels", "confidences", "thresholds", "rates"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has wrong length")
        if any(b <= a for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def num_intervals(self) -> int:
        return len(self.boundaries) - 1

    def interval_of(self, t: int) -> int:
        """Index ``i`` with ``t_{i-1} < t <= t_i`` (0 for ``t <= t_0``)."""
        return int(np.searchsorted(np.asarray(self.boundaries), t, side="left"))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "t_i", "a_i", "delta_i", "Lambda_i", "gamma_i"])
            for i in range(len(self.boundaries)):
                writer.writerow(
                    [
                        i,
                        self.boundaries[i],
                        repr(self.levels[i]),
                        repr(self.confidences[i]),
                        repr(self.thresholds[i]),
                        repr(self.rates[i]),
                    ]
                )


@dataclass(frozen=True)
class IntervalCheck:
    i: int
    T0: int
    T1: int
    deviation: float
    pullout_margin: float
    improvement_margin: float
    passed: bool
    error: str | None = None


def build_levels(kind: Literal["greedy-exempt", "multiplicative", "polynomial"], x0: float, eps: float) -> list[float]:
    """Level ladder ``a_1, ..., a_l`` moving from ``x0`` down to ``eps``.

    ``multiplicative`` halves each level and uses ``ceil(log2(x0/eps))``
    levels; ``polynomial`` uses ``a_i = (eps/4) (4 a_{i-1}/eps)^{3/4}`` with
    ``ceil(loglog(4 x0/eps) / log(4/3))`` levels. Greedy ladders depend on the
    dynamic, so ``greedy-exempt`` always raises.
    """
    if kind == "greedy-exempt":
        raise ValueError("greedy levels are problem-dependent; use sgd_uniform_plan or pca_uniform_plan")
    if not x0 > eps > 0:
        raise ValueError("need x0 > eps > 0")
    if kind == "multiplicative":
        count = math.ceil(math.log2(x0 / eps))
        return [x0 * 2.0**-i for i in range(1, count + 1)]
    if kind == "polynomial":
        count = math.ceil(math.log(math.log(4 * x0 / eps)) / math.log(4 / 3))
        levels, a = [], x0
        for _ in range(count):
            a = (eps / 4) * (4 * a / eps) ** 0.75
            levels.append(a)
        return levels
    raise ValueError(f"unknown ladder kind {kind!r}")


def split_confidence(delta: float, i: int) -> float:
    """``delta / (2 i^2)``; these sum to at most ``delta * pi^2 / 12``."""
    if i < 1:
        raise ValueError("interval index starts at 1")
    return delta / (2.0 * i * i)


# --------------------------------------------------------------------- SGD


def sgd_uniform_plan(G: float, lam: float, delta: float, max_intervals: int) -> IntervalPlan:
    """Doubling plan ``t_1 = 100, t_i = 2 t_{i-1}`` for SGD with step ``1/(lam t)``.

    ``a_i = 1000 G^2 log(1/delta_i) / (lam^2 t_i)``, ``Lambda_i = 2 a_{i-1}`` and
    ``a_0 = 1000 G^2 log(1/delta) / (lam^2 t_1)``.
    """
    if min(G, lam) <= 0 or max_intervals < 1:
        raise ValueError("positive inputs required")
    scale = SGD_RATE_CONSTANT * G * G / (lam * lam)
    bounds = [0, SGD_FIRST_BOUNDARY]
    for _ in range(max_intervals - 1):
        bounds.append(2 * bounds[-1])
    levels = [scale * math.log(1 / delta) / SGD_FIRST_BOUNDARY]
    confs, thresholds = [math.nan], [math.nan]
    for i in range(1, max_intervals + 1):
        d_i = split_confidence(delta, i)
        confs.append(d_i)
        levels.append(scale * math.log(1 / d_i) / bounds[i])
        thresholds.append(2 * levels[i - 1])
    return IntervalPlan(
        dynamic="sgd",
        boundaries=tuple(bounds),
        levels=tuple(levels),
        confidences=tuple(confs),
        thresholds=tuple(thresholds),
        rates=tuple([math.nan] * len(bounds)),
        notes={"G": G, "lam": lam, "delta": delta, "cap": 4 * G * G / (lam * lam)},
    )


def sgd_interval_deviation(
    G: float,
    lam: float,
    T0: int,
    T1: int,
    Lambda: float,
    delta_p: float,
    radical_time: Literal["T1", "T0"] = "T1",
) -> float:
    """Closed-form per-interval SGD deviation.

    ``(G^2 T1 log(1/d) / (lam^2 T0^2)) * (sqrt(70 T Lambda lam^2 / (G^2 log(1/d))) + 50)``
    with ``T = T1``. ``radical_time="T0"`` puts ``T0`` under the root instead,
    which is the substitution made when the doubling plan is checked by hand;
    it is smaller and only kept for comparison.
    """
    if T0 < SGD_FIRST_BOUNDARY:
        raise ValueError(f"T0 must be at least {SGD_FIRST_BOUNDARY}")
    if not T0 < T1:
        raise ValueError("need T0 < T1")
    if Lambda <= 0 or not 0 < delta_p < 1:
        raise ValueError("need Lambda > 0 and delta_p in (0, 1)")
    L = math.log(1 / delta_p)
    T = T1 if radical_time == "T1" else T0
    pre = G * G * T1 * L / (lam * lam * T0 * T0)
    return pre * (math.sqrt(70 * T * Lambda * lam * lam / (G * G * L)) + 50)


def sgd_product_decay(T0: int, t: int) -> float:
    """``prod_{s=T0+1}^{t} (1 - 2/s) = T0 (T0 - 1) / (t (t - 1))``."""
    if not 2 <= T0 <= t:
        raise ValueError("need 2 <= T0 <= t")
    return T0 * (T0 - 1) / (t * (t - 1))


def verify_sgd_plan(plan: IntervalPlan, radical_time: Literal["T1", "T0"] = "T1") -> list[IntervalCheck]:
    """Run :func:`verify_plan` on an SGD plan.

    Interval 1 starts at time 0, where the deviation lemma does not apply;
    there the almost-sure cap ``X <= 4 G^2 / lam^2`` stands in for
    ``a_0 + Delta_1`` and must stay below ``a_1``.
    """
    G, lam = plan.notes["G"], plan.notes["lam"]
    cap = plan.notes["cap"]

    def deviation(i, T0, T1, Lambda, d_i):
        return sgd_interval_deviation(G, lam, T0, T1, Lambda, d_i, radical_time=radical_time)

    checks = verify_plan(plan, deviation, sgd_product_decay, start=2)
    first = IntervalCheck(
        i=1,
        T0=plan.boundaries[0],
        T1=plan.boundaries[1],
        deviation=0.0,
        pullout_margin=plan.levels[1] - cap,
        improvement_margin=plan.levels[1] - cap,
        passed=cap < plan.levels[1],
    )
    return [first] + checks


# --------------------------------------------------------------------- PCA


def pca_block_length(gamma: float) -> int:
    """``ceil(-2 / log2(1 - gamma))``: steps until ``(1 - gamma)^n`` first drops to 1/4."""
    return math.ceil(-2.0 / math.log2(1.0 - gamma))


def pca_uniform_plan(lambda_top: float, gap: float, delta: float, max_intervals: int) -> IntervalPlan:
    """Halving plan for Oja's algorithm with a piecewise-constant step size.

    ``a_i = 2^-i``, ``gamma_i = a_{i-1} gap^2 / (29500 lambda log(1/delta_i))``,
    block length ``ceil(-2 / log2(1 - gamma_i))``, ``Lambda_i = 2 a_{i-1}`` and
    step size ``gamma_i / (2 gap)`` inside block ``i``.

    Raises:
        ConfigurationError: if a step size exceeds 1/4 or a block's decay
            ``(1 - gamma_i)^{len}`` leaves ``[1/5, 1/4]``.
    """
    if gap <= 0 or lambda_top < gap:
        raise ValueError("need gap > 0 and lambda_top >= gap")
    bounds, levels = [0], [1.0]
    confs, thresholds, rates = [math.nan], [math.nan], [math.nan]
    decays = [math.nan]
    for i in range(1, max_intervals + 1):
        d_i = split_confidence(delta, i)
        gamma = levels[i - 1] * gap * gap / (PCA_UNIFORM_CONSTANT * lambda_top * math.log(1 / d_i))
        eta = gamma / (2 * gap)
        if eta > MAX_PCA_LEARNING_RATE:
            raise ConfigurationError(f"interval {i}: step size {eta} exceeds 1/4")
        n = pca_block_length(gamma)
        decay = (1 - gamma) ** n
        if not 0.2 <= decay <= 0.25:
            raise ConfigurationError(f"interval {i}: decay {decay} outside [1/5, 1/4]")
        bounds.append(bounds[-1] + n)
        levels.append(2.0**-i)
        confs.append(d_i)
        thresholds.append(2 * levels[i - 1])
        rates.append(gamma)
        decays.append(decay)
    return IntervalPlan(
        dynamic="pca",
        boundaries=tuple(bounds),
        levels=tuple(levels),
        confidences=tuple(confs),
        thresholds=tuple(thresholds),
        rates=tuple(rates),
        notes={"lambda_top": lambda_top, "gap": gap, "delta": delta, "decays": tuple(decays)},
    )


def pca_interval_deviation(
    gamma: float,
    lambda_top: float,
    gap: float,
    T0: int,
    T1: int,
    Lambda: float,
    delta_p: float,
    variant: Literal["statement", "proof"] = "statement",
    check_domain: bool = True,
) -> float:
    """Closed-form per-interval deviation for Oja's algorithm.

    ``P * (sqrt(568 gap^2 Lambda / (gamma lambda L)) + sqrt(128 gap / (c lambda L)) + 94)``
    with ``P = gamma lambda L / (gap^2 (1 - gamma)^{T1 - T0})``, ``L = log(1/delta_p)``
    and ``c = gamma`` for ``variant="statement"`` or ``c = 1`` for
    ``variant="proof"``. Only the proof variant follows from the moment
    profile algebra; the statement variant is kept as the default form.

    Raises:
        ValueError: for ``Lambda > 1`` when ``check_domain`` is set, since the
            moment profile behind the formula assumes ``Lambda <= 1``.
    """
    if check_domain and not 0 < Lambda <= 1:
        raise ValueError(f"Lambda must lie in (0, 1], got {Lambda}")
    if not 0 < gamma < 1 or not T0 < T1 or not 0 < delta_p < 1:
        raise ValueError("need 0 < gamma < 1, T0 < T1 and delta_p in (0, 1)")
    L = math.log(1 / delta_p)
    pre = gamma * lambda_top * L / (gap * gap * (1 - gamma) ** (T1 - T0))
    c = gamma if variant == "statement" else 1.0
    return pre * (
        math.sqrt(568 * gap * gap * Lambda / (gamma * lambda_top * L))
        + math.sqrt(128 * gap / (c * lambda_top * L))
        + 94
    )


def verify_pca_plan(plan: IntervalPlan, variant: Literal["statement", "proof"] = "proof") -> list[IntervalCheck]:
    """Run :func:`verify_plan` on a PCA plan with decay ``(1 - gamma_i)^{len_i}``.

    The closed form is evaluated even when ``Lambda_i > 1`` (the first
    interval has ``Lambda_1 = 2``); :func:`pca_lemma_preconditions` reports
    where the moment-profile assumptions do not hold.
    """
    lam, gap = plan.notes["lambda_top"], plan.notes["gap"]

    def deviation(i, T0, T1, Lambda, d_i):
        return pca_interval_deviation(
            plan.rates[i], lam, gap, T0, T1, Lambda, d_i, variant=variant, check_domain=False
        )

    def decay(T0, T1):
        return (1 - plan.rates[plan.interval_of(T1)]) ** (T1 - T0)

    return verify_plan(plan, deviation, decay)


def pca_lemma_preconditions(plan: IntervalPlan) -> list[dict]:
    """Per interval: does ``Lambda_i <= 1`` and step size ``<= 1/4`` hold?"""
    gap = plan.notes["gap"]
    out = []
    for i in range(1, plan.num_intervals + 1):
        eta = plan.rates[i] / (2 * gap)
        out.append(
            {
                "i": i,
                "Lambda_ok": plan.thresholds[i] <= 1.0,
                "eta_ok": eta <= MAX_PCA_LEARNING_RATE,
                "Lambda": plan.thresholds[i],
                "eta": eta,
            }
        )
    return out


@dataclass(frozen=True)
class LastIterateBlocks:
    """Blocks for the last-iterate PCA analysis.

    Block ``i`` (1-based) covers ``(boundaries[i-1], boundaries[i]]``, has
    rate ``gammas[i-1] = gamma_1 / 2^{i-1}`` and length ``t_1 2^{i-1}``.
    """

    gammas: tuple[float, ...]
    boundaries: tuple[int, ...]
    Lambda: float
    gap: float

    def eta(self, block: int) -> float:
        return self.gammas[block - 1] / (2 * self.gap)

    def block_of(self, t: int) -> int:
        return int(np.searchsorted(np.asarray(self.boundaries), t, side="left"))

    def threshold(self, t: int, horizon: int) -> float:
        """``T Lambda / t_i^2`` for the block containing ``t``."""
        i = max(self.block_of(t), 1)
        return horizon * self.Lambda / self.boundaries[i] ** 2

    def block_decay(self, block: int) -> float:
        length = self.boundaries[block] - self.boundaries[block - 1]
        return (1 - self.gammas[block - 1]) ** length


def pca_last_iterate_rates(lambda_top: float, gap: float, delta: float, num_blocks: int) -> LastIterateBlocks:
    """Geometric blocks: rate halves and length doubles from block to block.

    ``gamma_1 = gap^2 / (100000 lambda log(1/delta))``, ``t_1`` is the
    block length for ``gamma_1`` and ``Lambda = 1000 lambda log(1/delta) / gap^2``.
    """
    if min(lambda_top, gap) <= 0 or num_blocks < 1:
        raise ValueError("positive inputs required")
    L = math.log(1 / delta)
    gamma1 = gap * gap / (PCA_LAST_CONSTANT * lambda_top * L)
    t1 = pca_block_length(gamma1)
    gammas = tuple(gamma1 / 2**i for i in range(num_blocks))
    bounds = [0]
    for i in range(num_blocks):
        bounds.append(bounds[-1] + t1 * 2**i)
    return LastIterateBlocks(
        gammas=gammas,
        boundaries=tuple(bounds),
        Lambda=PCA_LAST_THRESHOLD_CONSTANT * lambda_top * L / (gap * gap),
        gap=gap,
    )


# ----------------------------------------------------------------- checker


def verify_plan(
    plan: IntervalPlan,
    deviation: Callable[[int, int, int, float, float], float],
    decay: Callable[[int, int], float],
    start: int = 1,
) -> list[IntervalCheck]:
    """Check ``a_{i-1} + Delta_i < Lambda_i`` and ``decay * Lambda_i < a_i`` per interval.

    ``deviation(i, T0, T1, Lambda_i, delta_i)`` returns ``Delta_i``. A
    ``ValueError`` from it marks the interval as failed and is recorded.
    """
    checks = []
    for i in range(start, plan.num_intervals + 1):
        T0, T1 = plan.boundaries[i - 1], plan.boundaries[i]
        Lam = plan.thresholds[i]
        try:
            dev = deviation(i, T0, T1, Lam, plan.confidences[i])
        except ValueError as exc:
            checks.append(IntervalCheck(i, T0, T1, math.nan, math.nan, math.nan, False, str(exc)))
            continue
        pull = Lam - (plan.levels[i - 1] + dev)
        improve = plan.levels[i] - decay(T0, T1) * Lam
        checks.append(IntervalCheck(i, T0, T1, dev, pull, improve, pull > 0 and improve > 0))
    return checks
