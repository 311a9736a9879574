"""Two-level spin dynamics on the Bloch sphere (rotating frame).

Conventions, locked by golden tests in tests/test_bloch.py:

* z = +1 is the bright ms=0 state.
* The equation of motion is dv/dt = n x v with
  n = (Omega cos(phi), Omega sin(phi), Delta), i.e. right-handed
  precession about the drive/detuning axis.  Under this convention a
  pi/2 pulse about x takes +z to -y, and free evolution takes +x
  towards +y for positive detuning.

All operations are pure functions on immutable value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-9


@dataclass(frozen=True)
class BlochState:
    """Bloch vector of one effective two-level spin; |v| <= 1."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if n2 > 1.0 + NORM_TOL:
            raise ValueError(f"Bloch vector norm^2 = {n2} exceeds 1 + {NORM_TOL}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @staticmethod
    def from_array(v) -> "BlochState":
        return BlochState(float(v[0]), float(v[1]), float(v[2]))

    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)


BRIGHT = BlochState(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class DriveParams:
    """Constant rotating-frame drive.

    rabi_angular_freq : Omega, rad/s
    phase             : rotation-axis azimuth in the equatorial plane, rad
    detuning          : Delta, rad/s
    duration          : pulse length, s
    """

    rabi_angular_freq: float
    phase: float
    detuning: float
    duration: float

    def __post_init__(self):
        if self.rabi_angular_freq < 0:
            raise ValueError("rabi_angular_freq must be >= 0")
        if self.duration < 0:
            raise ValueError("duration must be >= 0")


def rotate_vectors(vecs: np.ndarray, axes: np.ndarray, angles) -> np.ndarray:
    """Rodrigues rotation of (..., 3) vectors about unit axes by angles.

    Right-handed: consistent with dv/dt = n x v for n = angle/dt * axis.
    Broadcasts over leading dimensions; used by the ensemble engine.
    """
    vecs = np.asarray(vecs, dtype=float)
    axes = np.asarray(axes, dtype=float)
    angles = np.asarray(angles, dtype=float)
    c = np.cos(angles)[..., None]
    s = np.sin(angles)[..., None]
    kdotv = np.sum(axes * vecs, axis=-1, keepdims=True)
    return vecs * c + np.cross(axes, vecs) * s + axes * kdotv * (1.0 - c)


def rotate_ideal(state: BlochState, phase: float, angle: float) -> BlochState:
    """Instantaneous rotation by `angle` about the equatorial axis at `phase`.

    Closed form; preserves the norm exactly.
    """
    axis = np.array([math.cos(phase), math.sin(phase), 0.0])
    v = rotate_vectors(state.as_array(), axis, angle)
    return BlochState.from_array(v)


def evolve_free(state: BlochState, tau: float, detuning: float) -> BlochState:
    """Free precession about z by detuning * tau; z is unchanged."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    a = detuning * tau
    c, s = math.cos(a), math.sin(a)
    return BlochState(c * state.x - s * state.y, s * state.x + c * state.y, state.z)


def evolve_driven(state: BlochState, drive: DriveParams, dt: float | None = None) -> BlochState:
    """Fixed-step RK4 integration of dv/dt = n x v over the pulse.

    dt must satisfy dt <= duration/50; the default uses duration/100.
    The number of steps is rounded up so the pulse length is exact.
    """
    T = drive.duration
    if T == 0.0:
        return state
    if dt is None:
        dt = T / 100.0
    if dt > T / 50.0 + 1e-18 * T:
        raise ValueError(f"dt = {dt} too coarse: must be <= duration/50 = {T / 50.0}")
    n_steps = max(1, math.ceil(T / dt - 1e-12))
    h = T / n_steps
    n = np.array(
        [
            drive.rabi_angular_freq * math.cos(drive.phase),
            drive.rabi_angular_freq * math.sin(drive.phase),
            drive.detuning,
        ]
    )
    v = state.as_array()
    for _ in range(n_steps):
        k1 = np.cross(n, v)
        k2 = np.cross(n, v + 0.5 * h * k1)
        k3 = np.cross(n, v + 0.5 * h * k2)
        k4 = np.cross(n, v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return BlochState.from_array(v)


def population_ms0(state: BlochState) -> float:
    """ms=0 (bright) population, (1+z)/2 clipped to [0, 1]."""
    return min(max((1.0 + state.z) / 2.0, 0.0), 1.0)


def rabi_population(omega, delta, t):
    """Closed-form ms=0 population for a constant drive starting from +z.

    P = 1 - (Omega^2/(Omega^2+Delta^2)) sin^2(sqrt(Omega^2+Delta^2) t / 2).
    Vectorized over any argument.
    """
    omega = np.asarray(omega, dtype=float)
    delta = np.asarray(delta, dtype=float)
    t = np.asarray(t, dtype=float)
    w2 = omega**2 + delta**2
    wr = np.sqrt(w2)
    frac = np.divide(omega**2, w2, out=np.zeros_like(w2), where=w2 > 0)
    return 1.0 - frac * np.sin(wr * t / 2.0) ** 2
