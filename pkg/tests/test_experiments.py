"""Experiment drivers: ODMR geometry, Rabi fit, coherence round trips,
AC response, sensitivity arithmetic, resolution curves."""

import math

import numpy as np
import pytest

from nvsim.constants import GAMMA_E, ZERO_FIELD_SPLITTING_HZ
from nvsim.ensemble import DetectionVolume, NoiseModel, sample_ensemble
from nvsim.experiments import (
    make_coherence_builder,
    odmr_dip_frequencies,
    resolution_vs_time,
    run_ac_magnetometry,
    run_coherence,
    run_odmr,
    run_phase_robustness,
    run_rabi,
    run_resolution,
    sensitivity_from_slope,
    synchronized_phase,
)
from nvsim.noise import AmplitudeErrorModel, OUBath, QuasiStaticSpread, calibrate_bath
from nvsim.readout import ReadoutModel, readout_shot_std
from nvsim.sequences import build_xy16

VOL = DetectionVolume()
OMEGA = math.pi / 48e-9


def make_ensemble(n=4000, seed=1, sigma=0.0, bath=OUBath(0.0, 1e-5), amp=AmplitudeErrorModel()):
    nm = NoiseModel(QuasiStaticSpread(sigma), bath, amp)
    return sample_ensemble(VOL, None, nm, n, seed, rabi_angular_freq=OMEGA), nm


# ---------------------------------------------------------------- ODMR

def test_odmr_dip_positions_at_2mT():
    dips = odmr_dip_frequencies(2e-3)
    # aligned lower branch: 2.870 GHz - 28.024 GHz/T * 2 mT = 2.813952 GHz
    assert dips[0] == pytest.approx(2.813952e9, rel=1e-9)
    assert dips[1] == pytest.approx(2.926048e9, rel=1e-9)
    # the reference device dip sits at 2.8088 GHz: within 6 MHz of the
    # Zeeman arithmetic (residual attributed to zero-field/strain offsets)
    assert abs(dips[0] - 2.8088e9) < 6e6


def test_odmr_misaligned_split_is_one_third():
    dips = odmr_dip_frequencies(2e-3)
    aligned_split = dips[1] - dips[0]
    misaligned_split = dips[3] - dips[2]
    assert aligned_split == pytest.approx(3.0 * misaligned_split, rel=1e-12)


def test_odmr_zero_field_degenerate():
    dips = odmr_dip_frequencies(0.0)
    assert np.all(dips == ZERO_FIELD_SPLITTING_HZ)


def test_odmr_fit_recovers_aligned_dip():
    freqs = np.linspace(2.77e9, 2.97e9, 1601)
    res = run_odmr(freqs, 2e-3, 6e6, contrast_aligned=0.02, contrast_misaligned=0.005)
    assert res.fit.converged
    assert res.fitted_dip_hz == pytest.approx(2.813952e9, abs=0.5e6)


def test_odmr_requires_sorted_sweep():
    with pytest.raises(ValueError):
        run_odmr(np.array([2.9e9, 2.8e9]), 2e-3, 6e6)


# ---------------------------------------------------------------- Rabi

def test_rabi_pi_time_homogeneous_no_noise():
    ens, _ = make_ensemble(n=256)
    durations = np.linspace(0.0, 400e-9, 81)
    res = run_rabi(durations, ens)
    assert res.fit.converged
    assert res.t_pi_s == pytest.approx(48e-9, abs=0.5e-9)
    assert res.population[0] == pytest.approx(1.0, abs=1e-12)


def test_rabi_decay_time_decreases_with_spread():
    taus = []
    for spread in (0.02, 0.05):
        ens, _ = make_ensemble(n=20000, seed=2, amp=AmplitudeErrorModel(sigma=spread))
        res = run_rabi(np.linspace(0.0, 2e-6, 301), ens)
        taus.append(res.fit.params[1])
        assert np.isfinite(res.fit.params[1])
    assert taus[1] < taus[0]


# ---------------------------------------------------------------- coherence

def test_coherence_echo_round_trip_small():
    bath = calibrate_bath(9e-6, 10e-6)
    ens, _ = make_ensemble(n=3000, seed=3, bath=bath)
    t_sweep = np.linspace(0.5e-6, 20e-6, 18)
    res = run_coherence("echo", 1, t_sweep, ens, bath, noise_seed=11)
    assert res.fit.converged and not res.censored
    assert res.t2_s == pytest.approx(9e-6, rel=0.08)


def test_coherence_censored_when_no_decay():
    bath = OUBath(0.0, 1e-5)
    ens, _ = make_ensemble(n=512, seed=4, bath=bath)
    res = run_coherence("echo", 1, np.linspace(1e-6, 20e-6, 10), ens, bath)
    assert res.censored
    assert np.all(res.signal_norm > 0.999)


def test_coherence_builder_families():
    for family, n_rep, expect in (("echo", 1, 1), ("cpmg", 8, 8), ("xy4", 2, 8),
                                  ("xy8", 2, 16), ("xy16", 2, 32), ("fid", 1, 0)):
        builder, n_pi = make_coherence_builder(family, n_rep)
        assert n_pi == expect
        seq = builder(16e-6)
        assert seq.n_pi_pulses == expect
        assert seq.total_free_time == pytest.approx(16e-6)
    with pytest.raises(ValueError):
        make_coherence_builder("udd", 1)


# ---------------------------------------------------------------- sensitivity

def test_sensitivity_from_slope_reference_arithmetic():
    # frozen: 89.4 uV / 320000 V/T * sqrt(1.47 ms) = 1.07115e-11 T/rtHz
    rep = sensitivity_from_slope(89.4e-6, 320000.0, 1.47e-3)
    assert rep.eta_t_per_sqrt_hz == pytest.approx(1.071145e-11, rel=1e-4)
    assert abs(rep.eta_t_per_sqrt_hz - 10.8e-12) / 10.8e-12 < 0.015


def test_sensitivity_from_slope_scalings():
    base = sensitivity_from_slope(89.4e-6, 320000.0, 1.47e-3).eta_t_per_sqrt_hz
    assert sensitivity_from_slope(2 * 89.4e-6, 320000.0, 1.47e-3).eta_t_per_sqrt_hz == pytest.approx(2 * base)
    assert sensitivity_from_slope(89.4e-6, 320000.0, 4 * 1.47e-3).eta_t_per_sqrt_hz == pytest.approx(2 * base)


def test_sensitivity_from_slope_rejects_zero_slope():
    with pytest.raises(ValueError):
        sensitivity_from_slope(89.4e-6, 0.0, 1.47e-3)


# ---------------------------------------------------------------- resolution

def test_resolution_reference_points():
    elapsed, minf = resolution_vs_time(89.4e-6, 320000.0, 1.47e-3, [1, 50000])
    assert minf[0] == pytest.approx(2.79375e-10, rel=1e-6)   # single shot: 0.279 nT
    assert elapsed[1] == pytest.approx(73.5, rel=1e-6)        # 50000 shots -> 73.5 s
    assert minf[1] == pytest.approx(2.79375e-10 / math.sqrt(50000), rel=1e-6)


def test_resolution_loglog_slope_is_exactly_minus_half():
    n = np.array([10, 100, 1000, 10000])
    elapsed, minf = resolution_vs_time(89.4e-6, 320000.0, 1.47e-3, n)
    slope = np.polyfit(np.log(elapsed), np.log(minf), 1)[0]
    assert slope == pytest.approx(-0.5, abs=1e-12)


def test_run_resolution_measured_slope():
    m = ReadoutModel(v0_v=0.5, contrast=0.02, shot_noise_v=57.7e-6, laser_fluct_rel=0.01)
    res = run_resolution(m, 110000.0, 1.47e-3, [100, 1000, 10000], blocks_per_point=40, seed=5)
    assert res.loglog_slope == pytest.approx(-0.5, abs=0.05)
    # measured matches the analytic shot-noise prediction
    assert np.allclose(res.min_field_t, res.ideal_min_field_t, rtol=0.25)


def test_readout_shot_std_matches_quadrature_sum():
    m = ReadoutModel(shot_noise_v=57.7e-6)
    assert readout_shot_std(m) == pytest.approx(89.4e-6, rel=2e-3)


# ---------------------------------------------------------------- AC sensing

def test_ac_magnetometry_odd_response_and_slope():
    bath = OUBath(0.0, 1e-5)
    ens, _ = make_ensemble(n=512, seed=6, bath=bath)
    readout = ReadoutModel(v0_v=0.5, contrast=0.02, shot_noise_v=57.7e-6)
    tau = 1.0 / (2 * 362e3)
    seq = build_xy16(1, tau, readout_phase=math.pi / 2)
    amplitudes = np.linspace(-2e-7, 2e-7, 17)
    res = run_ac_magnetometry(seq, 362e3, amplitudes, ens, bath, readout, 4000, 1.47e-3, shot_seed=7)
    assert res.fit.converged
    # odd response: zero crossing at the origin
    i0 = int(np.argmin(np.abs(amplitudes)))
    assert abs(res.signal_norm[i0]) < 1e-12
    assert np.allclose(res.signal_norm, -res.signal_norm[::-1], atol=1e-9)
    # slope at origin from the fit matches a central difference within 2%
    db = amplitudes[1] - amplitudes[0]
    numeric = (res.signal_norm[i0 + 1] - res.signal_norm[i0 - 1]) / (2 * db)
    analytic_slope = res.max_slope_v_per_t / (readout.v0_v * readout.contrast)
    assert analytic_slope == pytest.approx(abs(numeric), rel=0.02)
    # and the normalized response follows W sin((2/pi) gamma B T)
    T = seq.total_free_time
    expect = np.sin((2 / math.pi) * GAMMA_E * amplitudes * T)
    assert np.allclose(res.signal_norm, expect, atol=1e-9)


def test_ac_magnetometry_zero_crossings_equally_spaced():
    bath = OUBath(0.0, 1e-5)
    ens, _ = make_ensemble(n=256, seed=8, bath=bath)
    readout = ReadoutModel(v0_v=0.5, contrast=0.02, shot_noise_v=1e-6)
    tau = 1.0 / (2 * 362e3)
    seq = build_xy16(1, tau, readout_phase=math.pi / 2)
    T = seq.total_free_time
    period = 2 * math.pi / ((2 / math.pi) * GAMMA_E * T)
    amplitudes = np.linspace(-1.2 * period, 1.2 * period, 97)
    res = run_ac_magnetometry(seq, 362e3, amplitudes, ens, bath, readout, 100, 1.47e-3, shot_seed=9)
    sgn = np.sign(res.signal_norm)
    crossings = amplitudes[:-1][np.diff(sgn) != 0]
    gaps = np.diff(crossings)
    assert np.allclose(gaps, period / 2, rtol=0.05)


def test_ac_report_self_consistency_and_noise_prediction():
    # the report's eta must equal (delta_s/slope)*sqrt(t_seq) exactly, and
    # the measured delta_s must match the analytic shot-noise prediction
    # within 5% at 1e4 shots.
    bath = OUBath(0.0, 1e-5)
    ens, _ = make_ensemble(n=512, seed=12, bath=bath)
    readout = ReadoutModel(v0_v=0.5, contrast=0.02, shot_noise_v=57.7e-6)
    tau = 1.0 / (2 * 362e3)
    seq = build_xy16(1, tau, readout_phase=math.pi / 2)
    res = run_ac_magnetometry(
        seq, 362e3, np.linspace(-2e-7, 2e-7, 9), ens, bath, readout, 10000, 1.47e-3, shot_seed=13
    )
    rep = res.report
    assert rep.eta_t_per_sqrt_hz == pytest.approx(
        rep.delta_s_v / rep.max_slope_v_per_t * math.sqrt(rep.t_seq_s), rel=1e-12
    )
    assert rep.delta_s_v == pytest.approx(readout_shot_std(readout), rel=0.05)


def test_ac_warns_on_unsynchronized_tau():
    bath = OUBath(0.0, 1e-5)
    ens, _ = make_ensemble(n=64, seed=9, bath=bath)
    readout = ReadoutModel(v0_v=0.5, contrast=0.02, shot_noise_v=1e-6)
    seq = build_xy16(1, 1.2e-6, readout_phase=math.pi / 2)  # not 1/(2 f_ac)
    with pytest.warns(UserWarning, match="not synchronized"):
        run_ac_magnetometry(seq, 362e3, np.linspace(-1e-8, 1e-8, 9), ens, bath, readout, 10, 1.47e-3)


def test_synchronized_phase_helper():
    assert synchronized_phase(1e-9, 100e-6) == pytest.approx(
        (2 / math.pi) * GAMMA_E * 1e-9 * 100e-6
    )


# ---------------------------------------------------------------- robustness

def test_phase_robustness_xy16_beats_cpmg_smoke():
    bath = OUBath(0.0, 1e-5)
    nm = NoiseModel(QuasiStaticSpread(0.0), bath, AmplitudeErrorModel(systematic=0.05))
    ens = sample_ensemble(VOL, None, nm, 512, 10, rabi_angular_freq=OMEGA)
    tau = 1e-6
    fams = {
        "xy16": build_xy16(2, tau),
        "cpmg": __import__("nvsim.sequences", fromlist=["build_cpmg"]).build_cpmg(32, tau),
    }
    out = run_phase_robustness(fams, ens, bath, pulse_width=48e-9, n_phases=8)
    assert out["xy16"]["worst"] > out["cpmg"]["worst"]