"""Dephasing noise models: quasi-static detuning spread, an
Ornstein-Uhlenbeck bath, and pulse amplitude errors.

The OU process x(t) has stationary std b (rad/s), correlation time
tau_c (s), autocovariance C(t) = b^2 exp(-|t|/tau_c) and two-sided PSD
S(w) = 2 b^2 tau_c / (1 + w^2 tau_c^2).

Closed forms used as oracles throughout (x = t/tau_c):

    chi_fid(t)  = b^2 tau_c^2 (e^-x + x - 1)
    chi_echo(t) = b^2 tau_c^2 (x - 3 + 4 e^(-x/2) - e^-x)

with coherence W = exp(-chi) and chi = Var(phase)/2 for Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

# Above this ratio the echo response to the bath is effectively
# quasi-static and a finite calibration target cannot plausibly be
# attributed to bath dynamics.
MAX_TAU_C_RATIO = 1000.0


@dataclass(frozen=True)
class QuasiStaticSpread:
    """Zero-mean Gaussian static detuning per spin, std sigma_delta (rad/s)."""

    sigma_delta: float

    def __post_init__(self):
        if self.sigma_delta < 0:
            raise ValueError("sigma_delta must be >= 0")


@dataclass(frozen=True)
class OUBath:
    """Ornstein-Uhlenbeck detuning bath with coupling b and correlation tau_c."""

    b: float
    tau_c: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be >= 0")
        if self.tau_c <= 0:
            raise ValueError("tau_c must be > 0")

    def psd(self, omega):
        """Two-sided power spectral density, rad^2/s^2 per (rad/s)."""
        return 2.0 * self.b**2 * self.tau_c / (1.0 + (np.asarray(omega) * self.tau_c) ** 2)

    def autocov(self, t):
        return self.b**2 * np.exp(-np.abs(np.asarray(t)) / self.tau_c)


@dataclass(frozen=True)
class AmplitudeErrorModel:
    """Fractional Rabi-frequency error, fixed per spin per run.

    epsilon_i = systematic + N(0, sigma^2), redrawn until 1 + eps > 0.
    """

    sigma: float = 0.0
    systematic: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if 1.0 + self.systematic <= 0:
            raise ValueError("1 + systematic must be > 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        eps = self.systematic + self.sigma * rng.standard_normal(n)
        bad = eps <= -1.0
        while np.any(bad):
            eps[bad] = self.systematic + self.sigma * rng.standard_normal(int(bad.sum()))
            bad = eps <= -1.0
        return eps


NO_AMPLITUDE_ERROR = AmplitudeErrorModel()


def sigma_from_t2star(t2_star: float) -> float:
    """Detuning spread giving a Gaussian FID envelope with 1/e time t2_star.

    W(t) = exp(-sigma^2 t^2 / 2) = 1/e at t = t2_star  =>  sigma = sqrt(2)/t2_star.
    """
    if t2_star <= 0:
        raise ValueError("t2_star must be > 0")
    return math.sqrt(2.0) / t2_star


def sample_ou_path(bath: OUBath, duration: float, dt: float, rng: np.random.Generator):
    """Sample one OU trajectory on a uniform grid with the exact update.

    x_{k+1} = x_k e^(-dt/tau_c) + b sqrt(1 - e^(-2 dt/tau_c)) xi_k,
    x_0 ~ N(0, b^2).  Requires dt <= tau_c/10 and dt <= duration.
    Returns the values at times 0, dt, ..., n*dt covering `duration`.
    """
    if dt > bath.tau_c / 10.0:
        raise ValueError(f"dt = {dt} too coarse: must be <= tau_c/10 = {bath.tau_c / 10.0}")
    if dt > duration:
        raise ValueError("dt must be <= duration")
    n = int(math.ceil(duration / dt - 1e-12)) + 1
    if bath.b == 0.0:
        return np.zeros(n)
    mu = math.exp(-dt / bath.tau_c)
    s = bath.b * math.sqrt(-math.expm1(-2.0 * dt / bath.tau_c))
    x = np.empty(n)
    x[0] = rng.normal(0.0, bath.b)
    xi = rng.standard_normal(n - 1)
    for k in range(n - 1):
        x[k + 1] = mu * x[k] + s * xi[k]
    return x


def _integral_var_coeff(h):
    """g(h) = 2h - 3 + 4 e^-h - e^-2h, series-protected for small h."""
    h = np.asarray(h, dtype=float)
    small = h < 0.01
    exact = 2.0 * h - 3.0 + 4.0 * np.exp(-h) - np.exp(-2.0 * h)
    series = (2.0 / 3.0) * h**3 - 0.5 * h**4 + (7.0 / 30.0) * h**5
    return np.where(small, series, exact)


def sample_ou_segment_integrals(
    bath: OUBath, bounds: np.ndarray, n_paths: int, rng: np.random.Generator
) -> np.ndarray:
    """Exactly sample the integral of an OU path over consecutive segments.

    `bounds` are the m+1 segment boundaries (s); returns an (n_paths, m)
    array of integral values (rad).  The joint update of the process
    value and its running integral over each segment is Gaussian with
    known covariance, so arbitrarily long segments are sampled without
    discretization error.  Starts from the stationary distribution.
    """
    bounds = np.asarray(bounds, dtype=float)
    m = len(bounds) - 1
    out = np.empty((n_paths, m))
    if bath.b == 0.0:
        out[:] = 0.0
        return out
    b, tau = bath.b, bath.tau_c
    x = rng.normal(0.0, b, size=n_paths)
    for k in range(m):
        L = bounds[k + 1] - bounds[k]
        h = L / tau
        mu = math.exp(-h)
        one_minus_mu = -math.expm1(-h)
        v11 = b * b * (-math.expm1(-2.0 * h))
        v12 = b * b * tau * one_minus_mu**2
        v22 = b * b * tau * tau * float(_integral_var_coeff(h))
        a11 = math.sqrt(v11)
        a21 = v12 / a11
        a22 = math.sqrt(max(v22 - a21 * a21, 0.0))
        z1 = rng.standard_normal(n_paths)
        z2 = rng.standard_normal(n_paths)
        out[:, k] = tau * one_minus_mu * x + a21 * z1 + a22 * z2
        x = mu * x + a11 * z1
    return out


def chi_fid_ou(t, bath: OUBath):
    """Free-induction decoherence exponent under the OU bath."""
    x = np.asarray(t, dtype=float) / bath.tau_c
    return bath.b**2 * bath.tau_c**2 * (np.exp(-x) + x - 1.0)


def chi_echo_ou(t, bath: OUBath):
    """Hahn-echo decoherence exponent under the OU bath."""
    x = np.asarray(t, dtype=float) / bath.tau_c
    return bath.b**2 * bath.tau_c**2 * (x - 3.0 + 4.0 * np.exp(-x / 2.0) - np.exp(-x))


def ou_chi_exact(pi_times: np.ndarray, total_t: float, bath: OUBath) -> float:
    """Exact decoherence exponent for an ideal pi-pulse train under OU noise.

    Time-domain double integral of the autocovariance against the
    toggling sign function, evaluated segment-by-segment in closed form.
    Independent of the frequency-domain route in filters.coherence_analytic.
    """
    bounds = np.concatenate(([0.0], np.asarray(pi_times, dtype=float), [total_t]))
    if np.any(np.diff(bounds) < 0):
        raise ValueError("pulse times must lie within [0, total_t] in order")
    a = bounds[:-1]
    e = bounds[1:]
    m = len(a)
    y = (-1.0) ** np.arange(m)
    tau = bath.tau_c
    # diagonal terms
    h = (e - a) / tau
    var = np.sum(2.0 * tau * tau * (h - 1.0 + np.exp(-h)))
    # cross terms: segments are ordered, j < i disjoint
    for i in range(1, m):
        I = tau * tau * (
            np.exp(-(a[i] - e[:i]) / tau)
            - np.exp(-(a[i] - a[:i]) / tau)
            - np.exp(-(e[i] - e[:i]) / tau)
            + np.exp(-(e[i] - a[:i]) / tau)
        )
        var += 2.0 * y[i] * np.sum(y[:i] * I)
    return 0.5 * bath.b**2 * var


def calibrate_bath(target_t2: float, tau_c: float, seq_family: str = "echo") -> OUBath:
    """Find the OU coupling b such that the echo coherence hits 1/e at target_t2.

    Uses bracketed root finding on the closed-form echo exponent (which is
    exactly quadratic in b, so the bracket is certain).  tau_c above
    MAX_TAU_C_RATIO * target_t2 is rejected: in that regime the bath is
    quasi-static and the echo barely decays at the target time.
    """
    if target_t2 <= 0:
        raise ValueError("target_t2 must be > 0")
    if seq_family != "echo":
        raise ValueError(f"calibration is defined for the echo family, got {seq_family!r}")
    if tau_c > MAX_TAU_C_RATIO * target_t2:
        raise ValueError(
            f"tau_c = {tau_c} exceeds {MAX_TAU_C_RATIO} * target_t2: "
            "quasi-static bath, echo calibration is ill-conditioned"
        )
    chi_unit = float(chi_echo_ou(target_t2, OUBath(1.0, tau_c)))
    b0 = 1.0 / math.sqrt(chi_unit)
    f = lambda b: float(chi_echo_ou(target_t2, OUBath(b, tau_c))) - 1.0
    lo, hi = 0.5 * b0, 2.0 * b0
    if not (f(lo) < 0 < f(hi)):
        raise ValueError("calibration bracket failure")
    b = brentq(f, lo, hi, rtol=1e-9)
    return OUBath(float(b), tau_c)
