import math

import numpy as np
import pytest

from riszf.channel import PhaseShifts, aggregated_mean, build_los, h1_matrix
from riszf.config import default_profile
from riszf.errors import NumericalError
from riszf.estimation import compute_statistics, random_component_power
from riszf.optimizer import align_phase
from riszf.rate import (MonteCarloRate, exact_rate_mc, phase_independent_bound,
                        rate_lower_bound, power_scaling_limit, rate_no_ris,
                        rate_report, required_antennas, rate_lower_bound_snr, upper_bound)

from conftest import random_config, toy_config


# --- closed-form bounds -------------------------------------------------------

def test_lower_bound_equals_floor_at_delta_zero():
    rng = np.random.default_rng(0)
    for _ in range(10):
        cfg = random_config(rng, delta=0.0)
        ph = PhaseShifts.random(cfg.N, rng)
        lb = rate_lower_bound(cfg, ph)
        floor_bound, _ = phase_independent_bound(cfg)
        np.testing.assert_allclose(lb, floor_bound, rtol=1e-12)


def test_lower_bound_global_phase_invariance(reference_config):
    rng = np.random.default_rng(1)
    ph = PhaseShifts.random(reference_config.N, rng)
    rotated = PhaseShifts(np.exp(1j * 0.77) * ph.v)
    np.testing.assert_allclose(rate_lower_bound(reference_config, ph),
                               rate_lower_bound(reference_config, rotated),
                               rtol=1e-12)


def test_lower_bound_dense_inverse_oracle():
    # two-user system checked against an explicitly inverted 2x2 matrix
    cfg = toy_config(K=2, M=9, N=12, delta=1.7, seed=11)
    ph = PhaseShifts.random(cfg.N, 5)
    los = build_los(cfg)
    stats = compute_statistics(cfg)
    w = h1_matrix(cfg, los).conj().T @ (ph.v * los.a_n)
    rho = cfg.beta * cfg.delta / (cfg.delta + 1)
    dense = np.linalg.inv(stats.lam + rho * np.outer(w, w.conj()))
    denom = cfg.p * stats.epsilon.sum() + cfg.sigma2
    expected = cfg.tau_overhead * np.log2(
        1 + cfg.p * (cfg.M - cfg.K) / (denom * np.diag(dense).real))
    np.testing.assert_allclose(rate_lower_bound(cfg, ph), expected, rtol=1e-10)


def test_sandwich_chain_random_configs():
    rng = np.random.default_rng(2)
    for _ in range(25):
        cfg = random_config(rng)
        ph = PhaseShifts.random(cfg.N, rng)
        floor_bound, _ = phase_independent_bound(cfg)
        lb = rate_lower_bound(cfg, ph)
        ubg, uba = upper_bound(cfg, ph)
        tol = 1e-10
        assert np.all(floor_bound <= lb * (1 + tol) + 1e-15)
        assert np.all(lb <= ubg * (1 + tol) + 1e-15)
        assert np.all(ubg <= uba * (1 + tol) + 1e-15)


def test_floor_stays_below_lower_bound_many_phases(reference_config):
    floor_bound, _ = phase_independent_bound(reference_config)
    rng = np.random.default_rng(3)
    for _ in range(100):
        lb = rate_lower_bound(reference_config, PhaseShifts.random(reference_config.N, rng))
        assert np.all(floor_bound <= lb * (1 + 1e-10) + 1e-15)


def test_floor_bound_doubling_increment():
    # doubling the element count adds about one bit per user (overhead-scaled)
    floor_bound00 = phase_independent_bound(default_profile(N=200))[0]
    lb400 = phase_independent_bound(default_profile(N=400))[0]
    tau_o = default_profile().tau_overhead
    inc = lb400 - floor_bound00
    np.testing.assert_allclose(inc, tau_o * math.log2(2), rtol=0.10)


def test_floor_bound_approximation_gap():
    for n in (16, 64, 256):
        exact, approx = phase_independent_bound(default_profile(N=n))
        assert np.max(np.abs(approx - exact) / exact) < 0.02


def test_upper_bound_aligned_equality(reference_config):
    for k in (0, 3, reference_config.K - 1):
        ph = align_phase(reference_config, k)
        general, aligned = upper_bound(reference_config, ph)
        assert general[k] == pytest.approx(aligned[k], rel=1e-12)


def test_upper_bound_dominates_many_phases(reference_config):
    rng = np.random.default_rng(4)
    for _ in range(100):
        ph = PhaseShifts.random(reference_config.N, rng)
        lb = rate_lower_bound(reference_config, ph)
        ubg, _ = upper_bound(reference_config, ph)
        assert np.all(lb <= ubg * (1 + 1e-10) + 1e-15)


def test_aligned_upper_bound_doubling_increment():
    # the aligned user's bound gains ~2 bits when N doubles
    tau_o = default_profile().tau_overhead
    _, ub200 = upper_bound(default_profile(N=200), align_phase(default_profile(N=200), 0))
    _, ub400 = upper_bound(default_profile(N=400), align_phase(default_profile(N=400), 0))
    assert ub400[0] - ub200[0] == pytest.approx(2 * tau_o, rel=0.10)


def test_lower_bound_monotone_in_m_and_p(reference_config):
    ph = PhaseShifts.identity(reference_config.N)
    base = rate_lower_bound(reference_config, ph)
    for m in (80, 96, 128):
        nxt = rate_lower_bound(reference_config.replace(M=m), ph)
        assert np.all(nxt >= base - 1e-12)
        base = nxt
    base = rate_lower_bound(reference_config, ph)
    for scale in (1.5, 2.25, 4.0):
        nxt = rate_lower_bound(reference_config.replace(p=reference_config.p * scale), ph)
        assert np.all(nxt >= base - 1e-12)
        base = nxt


# --- conventional baseline ------------------------------------------------------

def test_rate_no_ris_equals_bound_with_ris_off():
    cfg = toy_config().replace(alpha=np.zeros(3), beta=0.0)
    ph = PhaseShifts.identity(cfg.N)
    np.testing.assert_allclose(rate_no_ris(cfg), rate_lower_bound(cfg, ph), rtol=1e-12)
    floor_bound, _ = phase_independent_bound(cfg)
    np.testing.assert_allclose(rate_no_ris(cfg), floor_bound, rtol=1e-12)


def test_rate_no_ris_power_scaling_limit():
    cfg = default_profile()
    e_u = 1.0
    m = 10**8
    scaled = cfg.replace(M=m, p=e_u / math.sqrt(m))
    limit = cfg.tau_overhead * np.log2(
        1 + cfg.tau * e_u**2 * cfg.gamma**2 / cfg.sigma2**2)
    np.testing.assert_allclose(rate_no_ris(scaled), limit, rtol=1e-3)


def test_rate_no_ris_vanishes_at_low_power():
    cfg = toy_config(K=3, M=4)
    rates = [rate_no_ris(cfg.replace(p=p)).max() for p in (1e-6, 1e-8, 1e-10)]
    assert rates[0] > rates[1] > rates[2]
    assert rates[-1] < 1e-6


def test_delta_sweep_approaches_no_ris():
    cfg = default_profile(delta=1e12)
    floor_bound, _ = phase_independent_bound(cfg)
    np.testing.assert_allclose(floor_bound, rate_no_ris(cfg), rtol=1e-3)


# --- power scaling limit ---------------------------------------------------------

def test_power_scaling_limit_delta_zero_equality():
    cfg = toy_config(delta=0.0)
    ph = PhaseShifts.random(cfg.N, 7)
    limit, bound = power_scaling_limit(cfg, ph, 5.0)
    np.testing.assert_allclose(limit, bound, rtol=1e-12)


def test_power_scaling_limit_two_user_scalar_oracle():
    # 2x2 closed form: [Xi^{-1}]_11 = (x + c|w2|^2/N) / det
    cfg = toy_config(K=2, M=9, N=8, delta=2.0, seed=13)
    ph = PhaseShifts.random(cfg.N, 3)
    e_u = 4.0
    los = build_los(cfg)
    w = h1_matrix(cfg, los).conj().T @ (ph.v * los.a_n)
    a = cfg.alpha * cfg.beta / (cfg.delta + 1)
    x = a**2 / (a + cfg.sigma2 / (cfg.tau * e_u))
    c = cfg.beta * cfg.delta / (cfg.delta + 1) / cfg.N
    det = (x[0] + c * abs(w[0])**2) * (x[1] + c * abs(w[1])**2) \
        - c**2 * abs(w[0])**2 * abs(w[1])**2
    pref = e_u * (cfg.M - cfg.K) / (
        sum(e_u / (cfg.tau * e_u / cfg.sigma2 + (cfg.delta + 1) / (cfg.alpha[i] * cfg.beta))
            for i in range(2)) + cfg.sigma2)
    expected = pref * det / np.array([x[1] + c * abs(w[1])**2, x[0] + c * abs(w[0])**2])
    limit, _ = power_scaling_limit(cfg, ph, e_u)
    np.testing.assert_allclose(limit, expected, rtol=1e-10)


def test_power_scaling_limit_reached_along_sweep():
    e_u = 10.0
    rates, limits = [], []
    for n in (1000, 10_000, 100_000):
        cfg = default_profile(N=n).replace(p=e_u / n)
        ph = PhaseShifts.identity(n)
        rates.append(np.mean(rate_lower_bound(cfg, ph)))
        limit, _ = power_scaling_limit(cfg, ph, e_u)
        limits.append(np.mean(cfg.tau_overhead * np.log2(1 + limit)))
    gaps = np.abs(np.array(rates) - np.array(limits)) / np.array(limits)
    assert gaps[-1] < 0.02
    assert gaps[0] >= gaps[-1] - 1e-9


def test_power_scaling_limit_rejects_bad_energy(reference_config):
    with pytest.raises(NumericalError):
        power_scaling_limit(reference_config, PhaseShifts.identity(reference_config.N), 0.0)


# --- antenna-count trade-off ------------------------------------------------------

def test_required_antennas_limits(reference_config):
    # overwhelming channel gain leaves only the ZF dimensionality floor
    cfg = reference_config.replace(beta=1.0)
    assert required_antennas(cfg, 10**12, 100.0, 0) == pytest.approx(cfg.K, rel=1e-6)


def test_required_antennas_product_identity(reference_config):
    cfg = reference_config
    c0, k = 25.0, 2
    products = []
    for n in (50, 100, 200, 400):
        m = required_antennas(cfg, n, c0, k)
        products.append((m - cfg.K) * (n * cfg.alpha[k] * cfg.beta + cfg.gamma[k]))
    np.testing.assert_allclose(products, products[0], rtol=1e-12)


# --- Monte-Carlo rate ---------------------------------------------------------------

def test_exact_rate_mc_deterministic(reference_config):
    ph = PhaseShifts.identity(reference_config.N)
    a = exact_rate_mc(reference_config, ph, 50, seed=5)
    b = exact_rate_mc(reference_config, ph, 50, seed=5)
    np.testing.assert_array_equal(a.rates, b.rates)
    np.testing.assert_array_equal(a.std_errors, b.std_errors)
    c = exact_rate_mc(reference_config, ph, 50, seed=6)
    assert not np.array_equal(a.rates, c.rates)
    assert isinstance(a, MonteCarloRate)
    assert a.singular_retries == 0
    assert a.sum_rate == pytest.approx(a.rates.sum())


def test_exact_rate_mc_matches_no_ris_closed_form():
    cfg = default_profile(K=4, M=32, N=16).replace(alpha=np.zeros(4), beta=0.0)
    mc = exact_rate_mc(cfg, PhaseShifts.identity(16), 1500, seed=7)
    np.testing.assert_allclose(mc.rates, rate_no_ris(cfg), rtol=0.05)


def test_exact_rate_mc_single_user_scalar_oracle():
    # perfect CSI through a long pilot phase; the ZF rate reduces to a
    # matched-filter SNR that a scalar simulation reproduces
    cfg = toy_config(K=1, M=8, N=16, delta=1.0, tau=10**6, tau_c=4 * 10**6,
                     p=1e6, sigma2=1.0, seed=15)
    mc = exact_rate_mc(cfg, PhaseShifts.identity(cfg.N), 1500, seed=8)
    mean = aggregated_mean(cfg, PhaseShifts.identity(cfg.N))[:, 0]
    cpow = random_component_power(cfg)[0]
    rng = np.random.default_rng(99)
    vals = np.empty(1500)
    for t in range(1500):
        q = mean + math.sqrt(cpow / 2) * (rng.standard_normal(cfg.M)
                                          + 1j * rng.standard_normal(cfg.M))
        vals[t] = cfg.tau_overhead * math.log2(1 + cfg.p * np.sum(np.abs(q)**2) / cfg.sigma2)
    combined_se = mc.std_errors[0] + vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(mc.rates[0] - vals.mean()) < 3 * combined_se


def test_exact_rate_mc_tracks_lower_bound(reference_config):
    ph = PhaseShifts.identity(reference_config.N)
    mc = exact_rate_mc(reference_config, ph, 800, seed=9)
    lb = rate_lower_bound(reference_config, ph)
    assert np.max(np.abs(mc.rates - lb) / lb) < 0.05


def test_exact_rate_mc_jensen_direction_at_delta_zero():
    cfg = default_profile(delta=0.0)
    ph = PhaseShifts.identity(cfg.N)
    mc = exact_rate_mc(cfg, ph, 2000, seed=10)
    lb = rate_lower_bound(cfg, ph)
    assert np.all(mc.rates >= lb - 3 * mc.std_errors)


def test_rate_report_bundles_everything(reference_config):
    ph = PhaseShifts.identity(reference_config.N)
    report = rate_report(reference_config, ph, trials=50, seed=11)
    assert report.trials == 50 and report.seed == 11
    assert report.tau_overhead == pytest.approx(reference_config.tau_overhead)
    k = reference_config.K
    for field in ("mc_rate", "mc_std_error", "lower_bound", "floor_bound", "floor_bound_approx",
                  "ub", "ub_aligned"):
        assert getattr(report, field).shape == (k,)
    assert np.all(report.floor_bound <= report.lower_bound * (1 + 1e-10))
    assert np.all(report.lower_bound <= report.ub * (1 + 1e-10))


def test_rate_lower_bound_snr_positive(reference_config):
    snr = rate_lower_bound_snr(reference_config, PhaseShifts.identity(reference_config.N))
    assert np.all(snr > 0)
