"""Noise models: OU sampling exactness, closed forms, bath calibration."""

import math

import numpy as np
import pytest

from nvsim.noise import (
    AmplitudeErrorModel,
    OUBath,
    QuasiStaticSpread,
    calibrate_bath,
    chi_echo_ou,
    chi_fid_ou,
    ou_chi_exact,
    sample_ou_path,
    sample_ou_segment_integrals,
    sigma_from_t2star,
)

BATH = OUBath(4.77e5, 10e-6)


def test_sigma_from_t2star_value():
    # sqrt(2) / 150 ns, frozen
    assert sigma_from_t2star(150e-9) == pytest.approx(9.428090415820634e6, rel=1e-12)


def test_sigma_limits():
    assert sigma_from_t2star(1e9) < 1e-8
    with pytest.raises(ValueError):
        sigma_from_t2star(0.0)


def test_quasistatic_gaussian_fid_one_over_e():
    # MC average of exp(i Delta t) at t = T2* must hit 1/e within 2%.
    sigma = sigma_from_t2star(150e-9)
    rng = np.random.default_rng(11)
    deltas = sigma * rng.standard_normal(200000)
    w = np.cos(deltas * 150e-9).mean()
    assert w == pytest.approx(math.exp(-1.0), rel=0.02)


def test_ou_path_zero_coupling():
    rng = np.random.default_rng(0)
    path = sample_ou_path(OUBath(0.0, 1e-6), 1e-5, 1e-7, rng)
    assert np.all(path == 0.0)


def test_ou_path_rejects_coarse_dt():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_ou_path(BATH, 1e-5, BATH.tau_c, rng)
    with pytest.raises(ValueError):
        sample_ou_path(BATH, 1e-8, 1e-7, rng)


def test_ou_path_stationary_variance():
    rng = np.random.default_rng(1)
    n_paths, k = 100000, 12
    dt = BATH.tau_c / 20
    # vectorized: k exact updates of n_paths states
    mu = math.exp(-dt / BATH.tau_c)
    s = BATH.b * math.sqrt(1 - mu * mu)
    x = rng.normal(0.0, BATH.b, n_paths)
    for _ in range(k):
        x = mu * x + s * rng.standard_normal(n_paths)
    assert np.var(x) == pytest.approx(BATH.b**2, rel=0.03)


def test_ou_path_lag_tauc_autocorrelation():
    rng = np.random.default_rng(2)
    n_paths = 100000
    dt = BATH.tau_c / 10
    steps = 10  # lag = tau_c
    x0 = rng.normal(0.0, BATH.b, n_paths)
    mu = math.exp(-dt / BATH.tau_c)
    s = BATH.b * math.sqrt(1 - mu * mu)
    x = x0.copy()
    for _ in range(steps):
        x = mu * x + s * rng.standard_normal(n_paths)
    cov = np.mean(x0 * x)
    assert cov == pytest.approx(BATH.b**2 / math.e, rel=0.05)


def test_closed_form_small_time_expansions():
    # chi_fid -> b^2 t^2 / 2 and chi_echo -> b^2 t^3 / (12 tau_c) for t << tau_c
    t = BATH.tau_c / 200
    assert chi_fid_ou(t, BATH) == pytest.approx(0.5 * BATH.b**2 * t**2, rel=2e-3)
    assert chi_echo_ou(t, BATH) == pytest.approx(
        BATH.b**2 * t**3 / (12 * BATH.tau_c), rel=2e-3
    )


def test_segment_integral_sampler_matches_fid_variance():
    rng = np.random.default_rng(3)
    T = 9e-6
    I = sample_ou_segment_integrals(BATH, np.array([0.0, T]), 200000, rng)
    assert I[:, 0].var() == pytest.approx(2.0 * float(chi_fid_ou(T, BATH)), rel=0.02)


def test_segment_integral_sampler_matches_echo_variance():
    rng = np.random.default_rng(4)
    T = 9e-6
    I = sample_ou_segment_integrals(BATH, np.array([0.0, T / 2, T]), 200000, rng)
    phi = I[:, 0] - I[:, 1]
    assert phi.var() == pytest.approx(2.0 * float(chi_echo_ou(T, BATH)), rel=0.02)


def test_segment_integral_sampler_zero_coupling():
    rng = np.random.default_rng(5)
    I = sample_ou_segment_integrals(OUBath(0.0, 1e-6), np.array([0.0, 1e-6, 2e-6]), 7, rng)
    assert np.all(I == 0.0)


def test_ou_chi_exact_matches_echo_closed_form():
    for T in (1e-6, 5e-6, 9e-6, 25e-6):
        got = ou_chi_exact(np.array([T / 2]), T, BATH)
        assert got == pytest.approx(float(chi_echo_ou(T, BATH)), rel=1e-10)


def test_ou_chi_exact_matches_fid_closed_form():
    for T in (1e-6, 9e-6):
        got = ou_chi_exact(np.array([]), T, BATH)
        assert got == pytest.approx(float(chi_fid_ou(T, BATH)), rel=1e-10)


def test_calibrate_bath_round_trip():
    bath = calibrate_bath(9e-6, 10e-6)
    assert math.exp(-float(chi_echo_ou(9e-6, bath))) == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_calibrate_bath_monotonic_in_target():
    b_short = calibrate_bath(9e-6, 10e-6).b
    b_long = calibrate_bath(18e-6, 10e-6).b
    assert b_long < b_short


def test_calibrate_bath_rejects_quasistatic_tau_c():
    with pytest.raises(ValueError):
        calibrate_bath(9e-6, 100e-3)


def test_calibrate_bath_rejects_bad_family():
    with pytest.raises(ValueError):
        calibrate_bath(9e-6, 10e-6, seq_family="cpmg")


def test_psd_convention():
    w = np.array([0.0, 1.0 / BATH.tau_c])
    S = BATH.psd(w)
    assert S[0] == pytest.approx(2 * BATH.b**2 * BATH.tau_c)
    assert S[1] == pytest.approx(BATH.b**2 * BATH.tau_c)


def test_amplitude_error_model():
    m = AmplitudeErrorModel(sigma=0.3, systematic=0.05)
    rng = np.random.default_rng(6)
    eps = m.sample(rng, 50000)
    assert np.all(1.0 + eps > 0)
    assert eps.mean() == pytest.approx(0.05, abs=0.01)
    with pytest.raises(ValueError):
        AmplitudeErrorModel(systematic=-1.0)
    with pytest.raises(ValueError):
        AmplitudeErrorModel(sigma=-0.1)


def test_quasistatic_spread_validation():
    with pytest.raises(ValueError):
        QuasiStaticSpread(-1.0)
    with pytest.raises(ValueError):
        OUBath(1.0, 0.0)
