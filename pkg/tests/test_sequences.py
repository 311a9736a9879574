"""Sequence builders: structure, timing, phase pattern, serialization."""

import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nvsim.bloch import BRIGHT, evolve_free, population_ms0, rotate_ideal
from nvsim.sequences import (
    Delay,
    Pulse,
    PulseSequence,
    build_cpmg,
    build_fid,
    build_hahn_echo,
    build_xy4,
    build_xy8,
    build_xy16,
    pi_pulse_phases,
    pulse_times,
)

taus = st.floats(1e-8, 1e-4)


def compose_ideal(seq: PulseSequence, detuning: float) -> float:
    """Direct unitary composition with the single-spin primitives.

    Independent oracle for the ensemble phase-algebra engine.
    """
    s = BRIGHT
    for e in seq.elements:
        if isinstance(e, Delay):
            s = evolve_free(s, e.tau, detuning)
        else:
            s = rotate_ideal(s, e.phase, e.angle)
    return population_ms0(s)


def test_hahn_echo_structure():
    seq = build_hahn_echo(2e-6)
    assert seq.n_pi_pulses == 1
    assert seq.total_free_time == pytest.approx(2e-6)
    first, last = seq.elements[0], seq.elements[-1]
    assert abs(first.angle - math.pi / 2) < 1e-15 and abs(last.angle - math.pi / 2) < 1e-15
    # interior pulse is a pi about y
    mid = [e for e in seq.elements if isinstance(e, Pulse)][1]
    assert abs(mid.angle - math.pi) < 1e-15 and abs(mid.phase - math.pi / 2) < 1e-15


def test_echo_rejects_nonpositive_duration():
    with pytest.raises(ValueError):
        build_hahn_echo(0.0)
    with pytest.raises(ValueError):
        build_hahn_echo(-1e-6)


def test_fid_degenerate_zero_time_allowed():
    seq = build_fid(0.0)
    assert seq.n_pi_pulses == 0
    assert compose_ideal(seq, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_cpmg_structure_and_delays():
    seq = build_cpmg(2, 1e-6)
    delays = [e.tau for e in seq.elements if isinstance(e, Delay)]
    assert delays == pytest.approx([0.5e-6, 1e-6, 0.5e-6])
    assert all(
        abs(e.phase - math.pi / 2) < 1e-15
        for e in seq.elements
        if isinstance(e, Pulse) and abs(e.angle - math.pi) < 1e-15
    )


def test_cpmg1_matches_echo_elements():
    assert build_cpmg(1, 2e-6).elements == build_hahn_echo(2e-6).elements


def test_cpmg_rejects_zero_pulses():
    with pytest.raises(ValueError):
        build_cpmg(0, 1e-6)


def test_xy16_pulse_counts():
    assert build_xy16(1, 1e-6).n_pi_pulses == 16
    assert build_xy16(16, 1e-6).n_pi_pulses == 256
    with pytest.raises(ValueError):
        build_xy16(0, 1e-6)


def test_xy_prefix_rule():
    p16 = list(pi_pulse_phases(build_xy16(1, 1e-6)))
    assert list(pi_pulse_phases(build_xy4(1, 1e-6))) == p16[:4]
    assert list(pi_pulse_phases(build_xy8(1, 1e-6))) == p16[:8]


def test_xy16_phase_multiset_checksum():
    phases = pi_pulse_phases(build_xy16(1, 1e-6))
    counts = Counter(round(p, 9) for p in phases)
    expected = {
        round(0.0, 9): 4,
        round(math.pi / 2, 9): 4,
        round(math.pi, 9): 4,
        round(3 * math.pi / 2, 9): 4,
    }
    assert dict(counts) == expected


def test_xy16_second_half_is_phase_inverted_first_half():
    p = list(pi_pulse_phases(build_xy16(1, 1e-6)))
    for a, b in zip(p[:8], p[8:]):
        assert (b - a) % (2 * math.pi) == pytest.approx(math.pi)


def test_pulse_times_echo():
    times, total = pulse_times(build_hahn_echo(2e-6))
    assert times == pytest.approx([1e-6])
    assert total == pytest.approx(2e-6)


def test_pulse_times_cpmg2():
    times, total = pulse_times(build_cpmg(2, 1e-6))
    assert times == pytest.approx([0.5e-6, 1.5e-6])
    assert total == pytest.approx(2e-6)


def test_pulse_times_xy16():
    times, total = pulse_times(build_xy16(1, 1e-6))
    assert times == pytest.approx([(k - 0.5) * 1e-6 for k in range(1, 17)])
    assert total == pytest.approx(16e-6)


@given(st.integers(1, 12), taus)
def test_symmetric_timing_spacing(n, tau):
    times, total = pulse_times(build_cpmg(n, tau))
    gaps = np.diff(np.concatenate(([0.0], times, [total])))
    assert gaps[0] == pytest.approx(tau / 2, rel=1e-12)
    assert gaps[-1] == pytest.approx(tau / 2, rel=1e-12)
    if n > 1:
        assert np.allclose(gaps[1:-1], tau, rtol=1e-12)


@given(st.sampled_from(["echo", "cpmg8", "xy4", "xy8", "xy16"]), taus)
def test_ideal_zero_noise_identity(family, tau):
    # Every builder composes to the identity absent noise: branch +1 ends bright.
    seq = {
        "echo": lambda: build_hahn_echo(tau),
        "cpmg8": lambda: build_cpmg(8, tau),
        "xy4": lambda: build_xy4(1, tau),
        "xy8": lambda: build_xy8(1, tau),
        "xy16": lambda: build_xy16(1, tau),
    }[family]()
    assert compose_ideal(seq, 0.0) == pytest.approx(1.0, abs=1e-9)
    assert compose_ideal(seq.with_readout_sign(-1), 0.0) == pytest.approx(0.0, abs=1e-9)


@given(st.floats(-2 * math.pi * 1e6, 2 * math.pi * 1e6))
def test_echo_refocuses_static_detuning(delta):
    seq = build_hahn_echo(2e-6)
    p_plus = compose_ideal(seq, delta)
    p_minus = compose_ideal(seq.with_readout_sign(-1), delta)
    assert (p_plus - p_minus) == pytest.approx(1.0, abs=1e-9)


def test_cpmg8_full_revival():
    seq = build_cpmg(8, 1e-6)
    assert compose_ideal(seq, 2 * math.pi * 0.7e6) == pytest.approx(1.0, abs=1e-9)


def test_xy16_population_independent_of_tau():
    ref = compose_ideal(build_xy16(1, 1e-9), 0.0)
    for tau in (1e-8, 1e-6, 5e-5):
        assert compose_ideal(build_xy16(1, tau), 0.0) == pytest.approx(ref, abs=1e-12)


def test_serialization_golden():
    seq = build_hahn_echo(2e-6)
    expected = (
        "PULSE 0 90\n"
        "DELAY 1e-06\n"
        "PULSE 90 180\n"
        "DELAY 1e-06\n"
        "PULSE 180 90\n"
    )
    assert seq.to_text() == expected


def test_serialization_roundtrip_stability():
    text = build_xy16(1, 1.5e-6).to_text()
    lines = text.strip().split("\n")
    assert len(lines) == 2 + 16 + 17  # pi/2 pulses + pi pulses + delays
    assert lines[0] == "PULSE 0 90"
    assert lines[-1] == "PULSE 180 90"


def test_readout_sign_flips_final_phase_only():
    a = build_xy16(1, 1e-6)
    b = a.with_readout_sign(-1)
    assert a.elements[:-1] == b.elements[:-1]
    assert (a.elements[-1].phase - b.elements[-1].phase) % (2 * math.pi) == pytest.approx(math.pi)
    assert b.with_readout_sign(-1) is b


def test_element_validation():
    with pytest.raises(ValueError):
        Pulse(0.0, 0.0)
    with pytest.raises(ValueError):
        Pulse(0.0, 2 * math.pi + 0.1)
    with pytest.raises(ValueError):
        Delay(-1e-9)
