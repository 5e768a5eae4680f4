import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from artifact.concentration import ThresholdSequence, first_crossing, stopped_increments
from artifact.sgd import (
    SgdConfig,
    SgdState,
    minor_process,
    oracle_grad,
    product_decay,
    project_ball,
    sgd_bound,
    sgd_moment_profile,
    sgd_noise_term,
    sgd_potential,
    sgd_step,
    simulate,
    simulate_reference,
    unit_sphere,
)

E1 = math.exp(-1)


def test_config_validation():
    SgdConfig()
    with pytest.raises(ValueError):
        SgdConfig(c=1.5)
    with pytest.raises(ValueError):
        SgdConfig(d=2, w_star=[2.0, 0.0], G=10)


def test_oracle_without_noise(rng):
    cfg = SgdConfig(d=2, c=0.0, w_star=[0.2, 0.1])
    np.testing.assert_allclose(oracle_grad([0.5, 0.5], cfg, rng), [0.3, 0.4])


def test_oracle_norm_at_optimum(rng):
    cfg = SgdConfig()
    for _ in range(50):
        assert np.linalg.norm(oracle_grad(cfg.w_star, cfg, rng)) == pytest.approx(1.0)


def test_oracle_unbiased():
    cfg = SgdConfig()
    r = np.random.default_rng(9)
    w = np.array([0.3, -0.2, 0.1, 0.0, 0.4])
    n = 100_000
    g = cfg.lam * (w - cfg.w_star) + cfg.c * unit_sphere(cfg.d, r, size=n)
    sd = cfg.c / math.sqrt(cfg.d)
    assert np.all(np.abs(g.mean(axis=0) - w) < 4 * sd / math.sqrt(n))


def test_step_examples(rng):
    cfg = SgdConfig(d=2, c=0.0)
    out = sgd_step(SgdState(np.array([1.0, 0.0]), 0), cfg, rng)
    np.testing.assert_allclose(out.w, 0.0, atol=1e-15)
    assert out.t == 1
    np.testing.assert_allclose(project_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])


def test_potential():
    assert sgd_potential([1, 2], [1, 2]) == 0.0
    assert sgd_potential([3, 4], [0, 0]) == 25.0
    assert sgd_potential([0, 0], [3, 4]) == 25.0


def test_noise_term_examples():
    cfg = SgdConfig(d=2, c=0.0)
    assert sgd_noise_term([1, 0], [1, 0], 2, cfg) == pytest.approx(0.25)
    g = np.array([0.3, -1.2])
    assert sgd_noise_term([0, 0], g, 1, cfg) == pytest.approx(g @ g)


def test_moment_profile_values():
    prof = sgd_moment_profile(SgdConfig(G=1.0, c=0.0), 100)
    assert prof.bounded_diff(200, 0.01) == pytest.approx(0.4)
    assert prof.cond_mean(200, 0.01) == pytest.approx(2e-4)
    assert prof.cond_var(200, 0.01) == pytest.approx(4e-4 * (0.8 + 7.5e-5), rel=1e-12)
    assert prof.cond_var(100, 0.0) == pytest.approx(3 / 100**4, rel=1e-12)
    with pytest.raises(ValueError):
        sgd_moment_profile(SgdConfig(), 99)


def test_bounds():
    cfg = SgdConfig(G=1.0, c=0.0)
    assert sgd_bound(1000, E1, "last", cfg) == pytest.approx(1.0)
    ts = np.arange(3, 2000)
    uni = [sgd_bound(int(t), 0.1, "uniform", SgdConfig()) for t in ts]
    assert all(b < a for a, b in zip(uni, uni[1:]))
    with pytest.raises(ValueError):
        sgd_bound(10, 0.1, "median", cfg)


@given(st.integers(1, 10**5), st.floats(1e-6, 0.99))
def test_uniform_dominates_last(t, delta):
    cfg = SgdConfig()
    assert sgd_bound(t, delta, "uniform", cfg) >= sgd_bound(t, delta, "last", cfg)


def test_product_decay_examples():
    assert product_decay(100, 102) == pytest.approx(9900 / 10302, rel=1e-14)
    assert product_decay(50, 51) == pytest.approx(1 - 2 / 51, rel=1e-14)
    assert product_decay(100, 10**4) == pytest.approx(9.901e-5, rel=1e-4)


def test_product_decay_telescopes():
    r = np.random.default_rng(1)
    for _ in range(100):
        T0 = int(r.integers(2, 500))
        t = T0 + int(r.integers(1, 2000))
        lit = math.prod(1 - 2 / s for s in range(T0 + 1, t + 1))
        assert product_decay(T0, t) == pytest.approx(lit, rel=1e-12)


def test_kernel_matches_reference():
    cfg = SgdConfig()
    X, N = simulate(cfg, 300, np.random.default_rng(5))
    dirs = unit_sphere(cfg.d, np.random.default_rng(5), size=300)
    Xr, Nr = simulate_reference(cfg, dirs)
    np.testing.assert_allclose(X, Xr, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(N, Nr, rtol=1e-10, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_path_cap_and_recursion(seed):
    cfg = SgdConfig()
    X, N = simulate(cfg, 2000, np.random.default_rng(seed))
    assert X.max() <= cfg.potential_cap
    t = np.arange(1, 2001)
    assert np.all(X[1:] <= (1 - 2 / t) * X[:-1] + N + 1e-12)


def test_long_run_stays_capped():
    cfg = SgdConfig()
    X, _ = simulate(cfg, 10_000, np.random.default_rng(77))
    assert X.max() <= cfg.potential_cap


def test_minor_process_unfolds_the_recursion():
    cfg = SgdConfig()
    X, N = simulate(cfg, 1000, np.random.default_rng(8))
    T0 = 100
    M = minor_process(N, T0, 1000)
    t = np.arange(T0, 1001)
    D = T0 * (T0 - 1) / (t * (t - 1))
    assert np.all(X[T0:] <= D * (X[T0] + M) + 1e-12)


def test_stopped_increments_respect_bounded_difference():
    # |M increment| <= B(t, Lambda) pathwise along stopped paths with a uniform threshold
    cfg = SgdConfig()
    T0, T1 = 100, 3000
    prof = sgd_moment_profile(cfg, T0)
    th = ThresholdSequence("uniform", 0.05)
    for seed in range(20):
        X, N = simulate(cfg, T1, np.random.default_rng(seed))
        M = minor_process(N, T0, T1)
        tau = first_crossing(X[T0:], th)
        inc = stopped_increments(M, tau)
        B = np.array([prof.bounded_diff(t, th.level) for t in range(T0 + 1, T1 + 1)])
        assert np.all(np.abs(inc) <= B)


def test_stopped_increment_moments_binned():
    # empirical conditional mean and variance of stopped increments, binned over t
    cfg = SgdConfig()
    T0, T1, Lam = 100, 800, 0.05
    prof = sgd_moment_profile(cfg, T0)
    th = ThresholdSequence("uniform", Lam)
    incs = []
    for seed in range(400):
        X, N = simulate(cfg, T1, np.random.default_rng(1000 + seed))
        M = minor_process(N, T0, T1)
        incs.append(stopped_increments(M, first_crossing(X[T0:], th)))
    incs = np.array(incs)
    ts = np.arange(T0 + 1, T1 + 1)
    for lo in range(0, len(ts), 100):
        block = incs[:, lo : lo + 100]
        t_hi = ts[lo : lo + 100][-1]
        se = block.std() / math.sqrt(block.size)
        assert block.mean() <= prof.cond_mean(t_hi, Lam) + 4 * se
        assert np.mean(block**2) <= prof.cond_var(t_hi, Lam) * 1.05 + prof.cond_mean(t_hi, Lam) ** 2
