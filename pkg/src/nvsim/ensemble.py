"""Ensemble sampling and the two-branch Monte Carlo evolution engine.

Spins are sampled over the optical detection volume with spatially
varying Rabi frequency, per-spin static detuning and amplitude error,
and an independent OU bath trajectory per spin.

Two evolution paths share the noise model:

* ideal pulses: pi rotations are perfect togglers, so each trajectory
  reduces to an accumulated phase.  Composing a z-rotation by theta and
  an ideal pi pulse at phase phi acts on the equatorial coherence
  c = x + iy as c -> e^(i theta) c and c -> e^(2 i phi) conj(c); folding
  the whole train gives c_final = e^(i Xi) c0 with
  Xi = theta_pattern + pi*(n mod 2) + sum_k (-1)^(n-k) theta_k.
  The branch populations follow in closed form.

* finite rectangular pulses: piecewise-constant fields are exact
  rotations, composed per spin with the pulse axis tilted by the
  instantaneous detuning and the angle scaled by Omega_i (1 + eps_i).

Noise is drawn in fixed-size spin blocks, each from its own
counter-based substream keyed on (seed, block index), so results are
bit-identical for any worker-thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_E
from .fields import FieldMap, rabi_from_b_vectors
from .noise import NO_AMPLITUDE_ERROR, AmplitudeErrorModel, OUBath, QuasiStaticSpread
from .sequences import Delay, Pulse, PulseSequence, pulse_times

SPIN_BLOCK = 2048


@dataclass(frozen=True)
class NoiseModel:
    """Per-spin noise: static spread, OU bath, amplitude-error model."""

    spread: QuasiStaticSpread
    bath: OUBath
    amplitude_error: AmplitudeErrorModel = NO_AMPLITUDE_ERROR


@dataclass(frozen=True)
class ACField:
    """Applied AC test field along the sensing axis."""

    amplitude_t: float
    freq_hz: float
    phase_rad: float = 0.0

    def phase_integral(self, t0: float, t1: float) -> float:
        """Integral of sin(2 pi f t + phase) over [t0, t1]."""
        w = 2.0 * math.pi * self.freq_hz
        if w == 0.0:
            return math.sin(self.phase_rad) * (t1 - t0)
        return (math.cos(w * t0 + self.phase_rad) - math.cos(w * t1 + self.phase_rad)) / w


@dataclass(frozen=True)
class DetectionVolume:
    """Cylindrical optical detection region above the driver plane."""

    beam_diameter_m: float = 30.0e-6
    depth_m: float = 0.3e-3
    standoff_m: float = 2.0e-4
    center_x_m: float = 0.0
    center_y_m: float = 0.0
    quoted_volume_m3: float | None = None

    def __post_init__(self):
        if self.beam_diameter_m <= 0 or self.depth_m <= 0:
            raise ValueError("beam_diameter_m and depth_m must be > 0")

    def geometric_volume_m3(self) -> float:
        return math.pi * (self.beam_diameter_m / 2.0) ** 2 * self.depth_m

    def volume_ratio_vs_quoted(self) -> float | None:
        """Quoted / geometric volume; the mismatch is documented, not resolved."""
        if self.quoted_volume_m3 is None:
            return None
        return self.quoted_volume_m3 / self.geometric_volume_m3()


@dataclass(frozen=True)
class EnsembleSample:
    """Monte Carlo representatives of the ensemble, deterministic per seed."""

    positions: np.ndarray      # (n, 3) m
    omega: np.ndarray          # (n,) rad/s nominal Rabi
    delta_static: np.ndarray   # (n,) rad/s
    epsilon: np.ndarray        # (n,) fractional amplitude error
    seed: int

    @property
    def n_spins(self) -> int:
        return len(self.omega)


def _rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=[seed, *key])))


def sample_ensemble(
    volume: DetectionVolume,
    field: FieldMap | None,
    noise: NoiseModel,
    n: int,
    seed: int,
    drive_power_w: float = 1.0,
    nv_axis=(0.0, 0.0, 1.0),
    rabi_angular_freq: float | None = None,
) -> EnsembleSample:
    """Draw n spins: uniform positions in the cylinder, local Rabi from the
    field map (or a uniform rabi_angular_freq), static detunings and
    amplitude errors from the noise model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng_pos = _rng_for(seed, 1)
    rng_delta = _rng_for(seed, 2)
    rng_eps = _rng_for(seed, 3)

    r = (volume.beam_diameter_m / 2.0) * np.sqrt(rng_pos.random(n))
    th = 2.0 * math.pi * rng_pos.random(n)
    z = volume.standoff_m + volume.depth_m * rng_pos.random(n)
    positions = np.column_stack(
        (volume.center_x_m + r * np.cos(th), volume.center_y_m + r * np.sin(th), z)
    )

    if field is None:
        if rabi_angular_freq is None:
            raise ValueError("rabi_angular_freq is required without a field map")
        omega = np.full(n, float(rabi_angular_freq))
    else:
        buv = field.interpolate(positions)  # T per sqrt(W)
        bvec = np.column_stack((buv[:, 0], np.zeros(n), buv[:, 1])) * math.sqrt(drive_power_w)
        omega = rabi_from_b_vectors(bvec, nv_axis)

    delta = noise.spread.sigma_delta * rng_delta.standard_normal(n)
    eps = noise.amplitude_error.sample(rng_eps, n)
    return EnsembleSample(positions, omega, delta, eps, seed)


class _OUStream:
    """Stateful exact OU sampler for one block of spins.

    advance(L) returns the exact per-spin integral of the process over the
    next L seconds and moves the internal state forward; value() is the
    current process value.  b = 0 degenerates to zeros.
    """

    def __init__(self, bath: OUBath, n: int, rng: np.random.Generator):
        self.bath = bath
        self.rng = rng
        self.x = rng.normal(0.0, bath.b, size=n) if bath.b > 0 else np.zeros(n)

    def value(self) -> np.ndarray:
        return self.x

    def advance(self, L: float) -> np.ndarray:
        if L == 0.0 or self.bath.b == 0.0:
            return np.zeros_like(self.x)
        b, tau = self.bath.b, self.bath.tau_c
        h = L / tau
        mu = math.exp(-h)
        one_minus_mu = -math.expm1(-h)
        v11 = b * b * (-math.expm1(-2.0 * h))
        v12 = b * b * tau * one_minus_mu**2
        if h < 0.01:
            g2 = (2.0 / 3.0) * h**3 - 0.5 * h**4 + (7.0 / 30.0) * h**5
        else:
            g2 = 2.0 * h - 3.0 + 4.0 * mu - mu * mu
        v22 = b * b * tau * tau * g2
        a11 = math.sqrt(v11)
        a21 = v12 / a11
        a22 = math.sqrt(max(v22 - a21 * a21, 0.0))
        z1 = self.rng.standard_normal(len(self.x))
        z2 = self.rng.standard_normal(len(self.x))
        integral = tau * one_minus_mu * self.x + a21 * z1 + a22 * z2
        self.x = mu * self.x + a11 * z1
        return integral


def _blocks(n: int):
    return [(i, min(i + SPIN_BLOCK, n)) for i in range(0, n, SPIN_BLOCK)]


def _map_blocks(fn, n: int, threads: int):
    """Run fn(block_index, lo, hi) over spin blocks; ordered, thread-safe."""
    blocks = _blocks(n)
    if threads <= 1 or len(blocks) == 1:
        return [fn(i, lo, hi) for i, (lo, hi) in enumerate(blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda args: fn(args[0], *args[1]), enumerate(blocks)))


def _sequence_phase_terms(seq: PulseSequence):
    """Segment bounds, toggling signs, and the pulse-pattern phase offset."""
    times, total_t = pulse_times(seq)
    n = len(times)
    bounds = np.concatenate(([0.0], times, [total_t]))
    signs = (-1.0) ** (n - np.arange(n + 1))
    phases = np.array(
        [e.phase for e in seq.elements if isinstance(e, Pulse) and abs(e.angle - math.pi) < 1e-12]
    )
    pattern = 2.0 * np.sum(phases * (-1.0) ** (n - np.arange(1, n + 1))) if n else 0.0
    offset = pattern + math.pi * (n % 2)
    return bounds, signs, offset, total_t


def _readout_angle(seq: PulseSequence, sign: int) -> float:
    return seq.readout_phase + (math.pi if sign > 0 else 0.0)


def run_two_branch(
    seq: PulseSequence,
    ensemble: EnsembleSample,
    bath: OUBath,
    b_ac: ACField | None = None,
    *,
    noise_seed: int = 0,
    pulse_width: float | None = None,
    threads: int = 1,
) -> tuple[float, float]:
    """Ensemble-averaged ms=0 populations for the two readout branches.

    Each spin carries its own static detuning, amplitude error, and a
    fresh OU trajectory keyed on (ensemble.seed, noise_seed, block).
    pulse_width = None uses ideal pulses; a finite width renders the
    sequence with rectangular pulses, delays center-to-center.
    """
    if pulse_width is not None:
        return _run_two_branch_finite(
            seq, ensemble, bath, b_ac, noise_seed=noise_seed, pulse_width=pulse_width, threads=threads
        )
    bounds, signs, offset, total_t = _sequence_phase_terms(seq)
    seg_len = np.diff(bounds)
    static_coeff = float(np.sum(signs * seg_len))
    phi_ac = 0.0
    if b_ac is not None:
        phi_ac = GAMMA_E * b_ac.amplitude_t * sum(
            s * b_ac.phase_integral(bounds[k], bounds[k + 1]) for k, s in enumerate(signs)
        )
    beta_plus = _readout_angle(seq, +1)
    n = ensemble.n_spins

    def block(bi, lo, hi):
        rng = _rng_for(ensemble.seed, 0xB0, noise_seed, bi)
        stream = _OUStream(bath, hi - lo, rng)
        phi_ou = np.zeros(hi - lo)
        for k, s in enumerate(signs):
            phi_ou += s * stream.advance(seg_len[k])
        xi = offset + static_coeff * ensemble.delta_static[lo:hi] + phi_ac + phi_ou
        return float(np.sum(np.cos(xi - beta_plus)))

    total = sum(_map_blocks(block, n, threads))
    m = total / n
    # cos(xi - beta_minus) = -cos(xi - beta_plus) since the branches differ by pi
    return (1.0 - m) / 2.0, (1.0 + m) / 2.0


def _render_finite(elements, pulse_width: float):
    """Timeline of ('pulse', phase, nominal_angle, width, t0) and
    ('free', L, t0) operations with pulses centered on their ideal instants.

    A pulse of nominal angle theta lasts theta/pi * pulse_width, so the
    pi/2 pulses are half-width.  Delays are shortened by the half-widths
    of the adjacent pulses (center-to-center timing); raises if
    neighboring pulses would overlap.
    """
    ops = []
    t = 0.0
    pending_gap = 0.0
    seen_delay = False
    prev_half = None
    for e in elements:
        if isinstance(e, Delay):
            pending_gap += e.tau
            seen_delay = True
            continue
        width = e.angle / math.pi * pulse_width
        if prev_half is not None or seen_delay:
            gap = pending_gap - (prev_half or 0.0) - width / 2.0
            if gap < -1e-15:
                raise ValueError("finite pulses overlap: reduce pulse width or increase tau")
            ops.append(("free", max(gap, 0.0), t))
            t += max(gap, 0.0)
        pending_gap = 0.0
        seen_delay = False
        ops.append(("pulse", e.phase, e.angle, width, t))
        t += width
        prev_half = width / 2.0
    if seen_delay:
        gap = pending_gap - (prev_half or 0.0)
        if gap < -1e-15:
            raise ValueError("finite pulses overlap: reduce pulse width or increase tau")
        ops.append(("free", max(gap, 0.0), t))
    return ops


def _rotate_z_inplace(v: np.ndarray, ang: np.ndarray):
    c, s = np.cos(ang), np.sin(ang)
    x = v[:, 0] * c - v[:, 1] * s
    v[:, 1] = v[:, 0] * s + v[:, 1] * c
    v[:, 0] = x


def _apply_rect_pulse(v, omega_eff, delta, phase, width):
    """Exact rotation for a rectangular pulse: axis (W cos, W sin, Delta)."""
    ax = omega_eff * math.cos(phase)
    ay = omega_eff * math.sin(phase)
    norm = np.sqrt(ax * ax + ay * ay + delta * delta)
    ang = norm * width
    with np.errstate(invalid="ignore", divide="ignore"):
        kx = np.where(norm > 0, ax / norm, 0.0)
        ky = np.where(norm > 0, ay / norm, 0.0)
        kz = np.where(norm > 0, delta / norm, 0.0)
    c = np.cos(ang)
    s = np.sin(ang)
    kdotv = kx * v[:, 0] + ky * v[:, 1] + kz * v[:, 2]
    cx = ky * v[:, 2] - kz * v[:, 1]
    cy = kz * v[:, 0] - kx * v[:, 2]
    cz = kx * v[:, 1] - ky * v[:, 0]
    omc = 1.0 - c
    v[:, 0] = v[:, 0] * c + cx * s + kx * kdotv * omc
    v[:, 1] = v[:, 1] * c + cy * s + ky * kdotv * omc
    v[:, 2] = v[:, 2] * c + cz * s + kz * kdotv * omc


def _run_two_branch_finite(seq, ensemble, bath, b_ac, *, noise_seed, pulse_width, threads):
    ops = _render_finite(seq.elements, pulse_width)
    # interior ops exclude the final readout pulse, applied per branch
    interior, final = ops[:-1], ops[-1]
    assert final[0] == "pulse"
    n = ensemble.n_spins

    def block(bi, lo, hi):
        rng = _rng_for(ensemble.seed, 0xB0, noise_seed, bi)
        stream = _OUStream(bath, hi - lo, rng)
        omega_eff = ensemble.omega[lo:hi] * (1.0 + ensemble.epsilon[lo:hi])
        delta_s = ensemble.delta_static[lo:hi]
        v = np.zeros((hi - lo, 3))
        v[:, 2] = 1.0
        for op in interior:
            if op[0] == "free":
                _, L, t0 = op
                phase = delta_s * L + stream.advance(L)
                if b_ac is not None:
                    phase = phase + GAMMA_E * b_ac.amplitude_t * b_ac.phase_integral(t0, t0 + L)
                _rotate_z_inplace(v, phase)
            else:
                _, phase, _angle, width, _t0 = op
                delta_now = delta_s + stream.value()
                _apply_rect_pulse(v, omega_eff, delta_now, phase, width)
                stream.advance(width)
        sums = []
        for sign in (+1, -1):
            vb = v.copy()
            beta = _readout_angle(seq, sign)
            delta_now = delta_s + stream.value()
            _apply_rect_pulse(vb, omega_eff, delta_now, beta, final[3])
            sums.append(float(np.sum((1.0 + vb[:, 2]) / 2.0)))
        return sums

    parts = _map_blocks(block, n, threads)
    tot_p = sum(p[0] for p in parts)
    tot_m = sum(p[1] for p in parts)
    return tot_p / n, tot_m / n


def normalized_branch_signal(p0_plus: float, p0_minus: float) -> float:
    """Noise-free normalized two-branch signal, +1 for a perfect revival."""
    return p0_plus - p0_minus


def equatorial_survival(
    seq: PulseSequence,
    ensemble: EnsembleSample,
    bath: OUBath,
    initial_phase: float,
    *,
    pulse_width: float | None = None,
    noise_seed: int = 0,
    threads: int = 1,
) -> float:
    """Coherence of an equatorial state under only the pi-pulse train.

    Prepares v0 = (cos a, sin a, 0), runs the interior pi pulses and
    delays of `seq` (the pi/2 pulses are skipped), and returns the
    ensemble mean of v_final . v0: the surviving projection on the
    prepared axis.  Used for pulse-error robustness comparisons.
    """
    train = tuple(
        e for e in seq.elements if isinstance(e, Delay) or abs(e.angle - math.pi) < 1e-12
    )
    v0 = np.array([math.cos(initial_phase), math.sin(initial_phase), 0.0])
    n = ensemble.n_spins

    if pulse_width is None:
        t = 0.0
        bounds = [0.0]
        phases = []
        for e in train:
            if isinstance(e, Delay):
                t += e.tau
            else:
                phases.append(e.phase)
                bounds.append(t)
        bounds.append(t)
        seg_len = np.diff(np.array(bounds))
        n_pi = len(phases)
        signs = (-1.0) ** (n_pi - np.arange(n_pi + 1))
        pattern = 2.0 * float(np.sum(np.array(phases) * (-1.0) ** (n_pi - np.arange(1, n_pi + 1))))
        static_coeff = float(np.sum(signs * seg_len))

        def block(bi, lo, hi):
            rng = _rng_for(ensemble.seed, 0xE0, noise_seed, bi)
            stream = _OUStream(bath, hi - lo, rng)
            phi = np.zeros(hi - lo)
            for k, s in enumerate(signs):
                phi += s * stream.advance(seg_len[k])
            phi = phi + ensemble.delta_static[lo:hi] * static_coeff
            # c_final = e^(i(pattern + phi)) * conj^parity(c0)
            c0 = complex(v0[0], v0[1])
            c0 = np.conjugate(c0) if n_pi % 2 else c0
            cf = np.exp(1j * (pattern + phi)) * c0
            return float(np.sum(cf.real * v0[0] + cf.imag * v0[1]))

        return sum(_map_blocks(block, n, threads)) / n

    ops = _render_finite(train, pulse_width)

    def block(bi, lo, hi):
        rng = _rng_for(ensemble.seed, 0xE0, noise_seed, bi)
        stream = _OUStream(bath, hi - lo, rng)
        omega_eff = ensemble.omega[lo:hi] * (1.0 + ensemble.epsilon[lo:hi])
        delta_s = ensemble.delta_static[lo:hi]
        v = np.tile(v0, (hi - lo, 1))
        for op in ops:
            if op[0] == "free":
                _, L, t0 = op
                _rotate_z_inplace(v, delta_s * L + stream.advance(L))
            else:
                _, phase, _angle, width, _t0 = op
                _apply_rect_pulse(v, omega_eff, delta_s + stream.value(), phase, width)
                stream.advance(width)
        return float(np.sum(v @ v0))

    return sum(_map_blocks(block, n, threads)) / n


def ensemble_rabi_curve(ensemble: EnsembleSample, durations) -> np.ndarray:
    """Ensemble-averaged ms=0 population vs resonant drive duration."""
    from .bloch import rabi_population

    durations = np.asarray(durations, dtype=float)
    omega_eff = ensemble.omega * (1.0 + ensemble.epsilon)
    pop = rabi_population(
        omega_eff[None, :], ensemble.delta_static[None, :], durations[:, None]
    )
    return pop.mean(axis=1)
