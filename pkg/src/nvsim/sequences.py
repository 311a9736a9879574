"""Pulse-sequence representation and decoupling-sequence builders.

A sequence is an ordered list of pulses (phase, angle) and free-evolution
delays.  Builders produce Hahn echo, CPMG-n, XY4/XY8/XY16-N and free
induction decay with symmetric timing: tau/2 before the first pi pulse,
tau between pi pulses, tau/2 after the last one.

Readout convention (locked by golden tests): the first pulse is
(pi/2, phase 0).  The final pulse has angle pi/2 and phase
readout_phase + pi for readout_sign = +1, readout_phase for -1.
With readout_phase = 0 the +1 branch of a noiseless sequence returns
the bright state (p0 = 1); readout_phase = pi/2 selects the quadrature
used for AC sensing, where the branch difference is odd in the
accumulated phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PH_X = 0.0
PH_Y = math.pi / 2.0
PH_XBAR = math.pi
PH_YBAR = 3.0 * math.pi / 2.0

# XY-16 pattern: the eight-pulse XY block followed by its phase-inverted copy.
XY8_PHASES = (PH_X, PH_Y, PH_X, PH_Y, PH_Y, PH_X, PH_Y, PH_X)
XY4_PHASES = XY8_PHASES[:4]
XY16_PHASES = XY8_PHASES + tuple((p + math.pi) % (2.0 * math.pi) for p in XY8_PHASES)


@dataclass(frozen=True)
class Pulse:
    phase: float
    angle: float

    def __post_init__(self):
        if not (0.0 < self.angle <= 2.0 * math.pi):
            raise ValueError(f"pulse angle {self.angle} outside (0, 2*pi]")


@dataclass(frozen=True)
class Delay:
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("delay must be >= 0")


@dataclass(frozen=True)
class PulseSequence:
    """Immutable pulse/delay program with a selectable readout branch."""

    elements: tuple
    label: str
    readout_sign: int = +1
    readout_phase: float = 0.0

    def __post_init__(self):
        if self.readout_sign not in (+1, -1):
            raise ValueError("readout_sign must be +1 or -1")

    @property
    def n_pi_pulses(self) -> int:
        return sum(
            1 for e in self.elements if isinstance(e, Pulse) and abs(e.angle - math.pi) < 1e-12
        )

    @property
    def total_free_time(self) -> float:
        return sum(e.tau for e in self.elements if isinstance(e, Delay))

    def with_readout_sign(self, sign: int) -> "PulseSequence":
        """Return the twin sequence with the other (or given) readout branch."""
        if sign == self.readout_sign:
            return self
        final = _final_pulse(sign, self.readout_phase)
        return replace(self, elements=self.elements[:-1] + (final,), readout_sign=sign)

    def to_text(self) -> str:
        """One element per line: PULSE phase_deg angle_deg / DELAY seconds."""
        lines = []
        for e in self.elements:
            if isinstance(e, Pulse):
                lines.append(f"PULSE {math.degrees(e.phase):g} {math.degrees(e.angle):g}")
            else:
                lines.append(f"DELAY {e.tau:.12g}")
        return "\n".join(lines) + "\n"


def _final_pulse(readout_sign: int, readout_phase: float) -> Pulse:
    shift = math.pi if readout_sign > 0 else 0.0
    return Pulse((readout_phase + shift) % (2.0 * math.pi), math.pi / 2.0)


def _assemble(pi_phases, tau, label, readout_sign, readout_phase) -> PulseSequence:
    n = len(pi_phases)
    elems = [Pulse(PH_X, math.pi / 2.0)]
    elems.append(Delay(tau / 2.0))
    for k, ph in enumerate(pi_phases):
        elems.append(Pulse(ph, math.pi))
        elems.append(Delay(tau if k < n - 1 else tau / 2.0))
    elems.append(_final_pulse(readout_sign, readout_phase))
    return PulseSequence(tuple(elems), label, readout_sign, readout_phase)


def build_fid(tau_total: float, readout_sign: int = +1, readout_phase: float = 0.0) -> PulseSequence:
    """Free induction decay: (pi/2) - tau - (+-pi/2), no refocusing pulses."""
    if tau_total < 0:
        raise ValueError("tau_total must be >= 0")
    elems = (
        Pulse(PH_X, math.pi / 2.0),
        Delay(tau_total),
        _final_pulse(readout_sign, readout_phase),
    )
    return PulseSequence(elems, "fid", readout_sign, readout_phase)


def build_hahn_echo(
    tau_total: float, readout_sign: int = +1, readout_phase: float = 0.0
) -> PulseSequence:
    """Spin echo: (pi/2)x - tau/2 - (pi)y - tau/2 - (+-pi/2), tau_total total free time."""
    if tau_total <= 0:
        raise ValueError("tau_total must be > 0")
    return _assemble((PH_Y,), tau_total, "echo", readout_sign, readout_phase)


def build_cpmg(
    n: int, tau: float, readout_sign: int = +1, readout_phase: float = 0.0
) -> PulseSequence:
    """CPMG-n: n pi pulses, all phase y, symmetric timing with spacing tau."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return _assemble((PH_Y,) * n, tau, f"cpmg-{n}", readout_sign, readout_phase)


def _build_xy(phases, n_repeats, tau, label, readout_sign, readout_phase):
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return _assemble(phases * n_repeats, tau, label, readout_sign, readout_phase)


def build_xy4(n_repeats: int, tau: float, readout_sign: int = +1, readout_phase: float = 0.0):
    return _build_xy(XY4_PHASES, n_repeats, tau, f"xy4-{n_repeats}", readout_sign, readout_phase)


def build_xy8(n_repeats: int, tau: float, readout_sign: int = +1, readout_phase: float = 0.0):
    return _build_xy(XY8_PHASES, n_repeats, tau, f"xy8-{n_repeats}", readout_sign, readout_phase)


def build_xy16(n_repeats: int, tau: float, readout_sign: int = +1, readout_phase: float = 0.0):
    return _build_xy(XY16_PHASES, n_repeats, tau, f"xy16-{n_repeats}", readout_sign, readout_phase)


def pulse_times(seq: PulseSequence):
    """Center times of all pi pulses plus the total free-evolution duration.

    Pulses are placed at the instant reached by the accumulated delays
    (instantaneous rendering; with finite widths these are center times).
    """
    t = 0.0
    centers = []
    for e in seq.elements:
        if isinstance(e, Delay):
            t += e.tau
        elif abs(e.angle - math.pi) < 1e-12:
            centers.append(t)
    times = np.array(centers)
    if len(times) > 1 and not np.all(np.diff(times) > 0):
        raise ValueError("pi-pulse times are not strictly increasing")
    return times, t


def pi_pulse_phases(seq: PulseSequence) -> np.ndarray:
    """Phases of the interior pi pulses, in order."""
    return np.array(
        [e.phase for e in seq.elements if isinstance(e, Pulse) and abs(e.angle - math.pi) < 1e-12]
    )
