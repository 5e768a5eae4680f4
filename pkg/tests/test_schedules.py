import csv
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact import schedules as sch
from artifact.schedules import (
    ConfigurationError,
    IntervalPlan,
    build_levels,
    pca_interval_deviation,
    pca_last_iterate_rates,
    pca_uniform_plan,
    sgd_interval_deviation,
    sgd_product_decay,
    sgd_uniform_plan,
    split_confidence,
    verify_pca_plan,
    verify_plan,
    verify_sgd_plan,
)

E1 = math.exp(-1)


def test_multiplicative_ladder():
    levels = build_levels("multiplicative", 1.0, 2.0**-10)
    assert levels == [2.0**-i for i in range(1, 11)]
    assert build_levels("multiplicative", 1.0, 0.5) == [0.5]


def test_polynomial_ladder_length():
    eps = 4 * math.exp(-math.e)
    levels = build_levels("polynomial", 1.0, eps)
    assert len(levels) == math.ceil(1 / math.log(4 / 3)) == 4
    a = 1.0
    for lv in levels:
        a = (eps / 4) * (4 * a / eps) ** 0.75
        assert lv == pytest.approx(a, rel=1e-12)


def test_ladder_errors():
    with pytest.raises(ValueError):
        build_levels("greedy-exempt", 1.0, 0.1)
    with pytest.raises(ValueError):
        build_levels("multiplicative", 0.1, 0.1)
    with pytest.raises(ValueError):
        build_levels("harmonic", 1.0, 0.1)


@given(st.integers(0, 30), st.booleans())
def test_multiplicative_ladder_count(k, plus_one):
    ratio = 2**k + (1 if plus_one else 0)
    if ratio <= 1:
        return
    assert len(build_levels("multiplicative", float(ratio), 1.0)) == math.ceil(math.log2(ratio))


def test_split_confidence():
    assert split_confidence(0.2, 3) == pytest.approx(1 / 90, rel=1e-12)
    assert split_confidence(0.2, 1) == pytest.approx(0.1, rel=1e-12)
    total = math.fsum(split_confidence(1.0, i) for i in range(1, 10**6 + 1))
    assert total == pytest.approx(0.8224, abs=1e-4)
    assert total < math.pi**2 / 12 < 1
    with pytest.raises(ValueError):
        split_confidence(0.1, 0)


@given(st.floats(1e-6, 0.999), st.integers(1, 2000))
def test_confidence_budget(delta, ell):
    assert math.fsum(split_confidence(delta, i) for i in range(1, ell + 1)) <= delta


def test_sgd_plan_values():
    plan = sgd_uniform_plan(1.0, 1.0, 0.1, 5)
    assert plan.boundaries == (0, 100, 200, 400, 800, 1600)
    assert plan.confidences[1] == pytest.approx(0.05)
    assert plan.levels[1] == pytest.approx(10 * math.log(20), rel=1e-12)
    assert plan.levels[0] == pytest.approx(10 * math.log(10), rel=1e-12)
    assert plan.thresholds[2] == 2 * plan.levels[1]
    assert all(b < a for a, b in zip(plan.levels[1:], plan.levels[2:]))
    # a_0 uses log(1/delta) rather than log(1/delta_1), so it sits below a_1
    assert plan.levels[0] < plan.levels[1]


def test_sgd_interval_deviation_examples():
    assert sgd_interval_deviation(1, 1, 100, 200, 1 / 140, E1) == pytest.approx(1.2, rel=1e-9)
    tiny = sgd_interval_deviation(1, 1, 100, 200, 1e-300, E1)
    assert tiny == pytest.approx(200 / 1e4 * 50, rel=1e-9)
    for T1 in (150, 200, 400):
        assert sgd_interval_deviation(1, 1, 100, 2 * T1, 0.3, 0.05) > 2 * sgd_interval_deviation(1, 1, 100, T1, 0.3, 0.05)
    with pytest.raises(ValueError):
        sgd_interval_deviation(1, 1, 99, 200, 1.0, 0.1)


def test_sgd_interval_deviation_t0_radical():
    full = sgd_interval_deviation(1, 1, 100, 200, 1 / 140, E1)
    half = sgd_interval_deviation(1, 1, 100, 200, 1 / 140, E1, radical_time="T0")
    assert half == pytest.approx(0.02 * (math.sqrt(50) + 50), rel=1e-12)
    assert half < full


def test_sgd_product_decay_matches_product():
    for T0, t in ((100, 102), (100, 1000), (2, 50)):
        lit = math.prod(1 - 2 / s for s in range(T0 + 1, t + 1))
        assert sgd_product_decay(T0, t) == pytest.approx(lit, rel=1e-12)


def test_sgd_plan_pullout_fails_after_first_interval():
    # The closed-form deviation exceeds a_{i-1} once T0 >= 100; see the notes in README.
    for delta in (0.2, 0.1, 0.01):
        plan = sgd_uniform_plan(1.0, 1.0, delta, 20)
        checks = verify_sgd_plan(plan)
        assert checks[0].passed
        assert all(c.improvement_margin > 0 for c in checks)
        assert all(c.pullout_margin < 0 for c in checks[1:])
    plan = sgd_uniform_plan(1.0, 1.0, 0.1, 2)
    dev = sgd_interval_deviation(1, 1, 100, 200, plan.thresholds[2], plan.confidences[2])
    assert verify_sgd_plan(plan)[1].pullout_margin == pytest.approx(plan.thresholds[2] - plan.levels[1] - dev)


def test_pca_plan_values():
    plan = pca_uniform_plan(0.55, 0.175, 0.1, 12)
    assert plan.boundaries[0] == 0 and plan.levels[0] == 1.0
    assert plan.rates[1] == pytest.approx(0.030625 / (29500 * 0.55 * math.log(20)), rel=1e-12)
    assert plan.rates[1] == pytest.approx(6.30e-7, rel=2e-3)
    for i in range(1, 13):
        decay = (1 - plan.rates[i]) ** (plan.boundaries[i] - plan.boundaries[i - 1])
        assert 0.2 <= decay <= 0.25
        assert plan.levels[i] == 2.0**-i
        assert plan.thresholds[i] == 2 * plan.levels[i - 1]


def test_pca_plan_configuration_error(monkeypatch):
    monkeypatch.setattr(sch, "PCA_UNIFORM_CONSTANT", 1e-3)
    with pytest.raises(ConfigurationError):
        pca_uniform_plan(0.55, 0.175, 0.1, 3)


def test_pca_interval_deviation_examples():
    value = pca_interval_deviation(0.5, 1.0, 0.5, 0, 2, 1.0, E1)
    assert value == pytest.approx(8 * (math.sqrt(284) + math.sqrt(128) + 94), rel=1e-9)
    assert value == pytest.approx(977.3, abs=0.05)
    proof = pca_interval_deviation(0.5, 1.0, 0.5, 0, 2, 1.0, E1, variant="proof")
    assert proof == pytest.approx(8 * (math.sqrt(284) + math.sqrt(64) + 94), rel=1e-9)
    zero_lam = pca_interval_deviation(0.5, 1.0, 0.5, 0, 2, 1e-300, E1)
    assert zero_lam == pytest.approx(8 * (math.sqrt(128) + 94), rel=1e-9)
    with pytest.raises(ValueError):
        pca_interval_deviation(0.5, 1.0, 0.5, 0, 2, 1.5, E1)
    assert pca_interval_deviation(0.5, 1.0, 0.5, 0, 2, 1.5, E1, check_domain=False) > value


def test_pca_deviation_linear_in_lambda_when_constant_dominates():
    small = pca_interval_deviation(1e-3, 1.0, 0.5, 0, 10, 1e-12, 0.1, variant="proof")
    big = pca_interval_deviation(1e-3, 2.0, 0.5, 0, 10, 1e-12, 0.1, variant="proof")
    assert big / small == pytest.approx(2.0, rel=0.05)


def test_pca_plan_verifies_with_proof_deviation():
    for delta in (0.2, 0.1, 0.01):
        plan = pca_uniform_plan(0.55, 0.175, delta, 20)
        checks = verify_pca_plan(plan)
        assert all(c.passed for c in checks)
        for c in checks:
            assert plan.levels[c.i - 1] + c.deviation < 2 * plan.levels[c.i - 1]


def test_pca_plan_statement_deviation_is_too_large():
    plan = pca_uniform_plan(0.55, 0.175, 0.1, 3)
    assert not any(c.passed for c in verify_pca_plan(plan, variant="statement"))


def test_pca_preconditions_flag_first_interval():
    plan = pca_uniform_plan(0.55, 0.175, 0.1, 3)
    flags = sch.pca_lemma_preconditions(plan)
    assert [f["Lambda_ok"] for f in flags] == [False, True, True]
    assert all(f["eta_ok"] for f in flags)


def test_last_iterate_rates():
    b = pca_last_iterate_rates(1.0, 1.0, E1, 4)
    assert b.gammas[0] == pytest.approx(1e-5, rel=1e-12)
    assert b.gammas[1] == pytest.approx(b.gammas[0] / 2)
    t1 = b.boundaries[1]
    assert t1 == math.ceil(-2 / math.log2(1 - 1e-5))
    assert b.boundaries[2] - b.boundaries[1] == 2 * t1
    assert b.Lambda == pytest.approx(1000.0)
    assert b.eta(2) == pytest.approx(b.gammas[1] / 2)
    prod = 1.0
    for i in range(1, 5):
        prod *= b.block_decay(i)
        assert prod <= 4.0**-i * (1 + 1e-4)
    assert b.threshold(t1, 10 * t1) == pytest.approx(10 * 1000.0 / t1)


def test_plan_with_low_thresholds_fails_pullout():
    plan = pca_uniform_plan(0.55, 0.175, 0.1, 3)
    low = IntervalPlan(
        "pca", plan.boundaries, plan.levels, plan.confidences,
        (math.nan,) + tuple(plan.levels[:-1]), plan.rates, plan.notes,
    )
    checks = verify_plan(low, lambda i, T0, T1, L, d: 0.0, lambda T0, T1: 0.25)
    assert not any(c.passed for c in checks)
    assert all(c.pullout_margin <= 0 for c in checks)


def test_verify_plan_records_errors():
    plan = sgd_uniform_plan(1, 1, 0.1, 2)
    checks = verify_plan(plan, lambda *a: sgd_interval_deviation(1, 1, 0, 100, 1, 0.1), sgd_product_decay)
    assert not checks[0].passed and "T0" in checks[0].error


def test_plan_csv(tmp_path):
    plan = pca_uniform_plan(0.55, 0.175, 0.1, 3)
    path = tmp_path / "plan.csv"
    plan.to_csv(path)
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert list(rows[0]) == ["i", "t_i", "a_i", "delta_i", "Lambda_i", "gamma_i"]
    assert len(rows) == 4
    assert int(rows[2]["t_i"]) == plan.boundaries[2]
    assert float(rows[2]["gamma_i"]) == plan.rates[2]
    assert float(rows[1]["Lambda_i"]) == plan.thresholds[1]


def test_plan_validates_shape():
    with pytest.raises(ValueError):
        IntervalPlan("x", (0, 1), (1.0,), (0.1, 0.1), (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        IntervalPlan("x", (0, 0), (1.0, 1.0), (0.1, 0.1), (1.0, 1.0), (1.0, 1.0))
