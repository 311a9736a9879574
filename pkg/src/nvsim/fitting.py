"""Deterministic nonlinear least-squares fits for the experiment curves.

Every fit uses a documented, data-derived initialization (no randomness)
and a fixed trust-region solve, so identical data produce bit-identical
results.  Models:

    lorentzian dip : c - d * (hw^2 / ((x - x0)^2 + hw^2))
    damped sine    : a * exp(-t/tau_d) * cos(2 pi f t) + c
    stretched exp  : a * exp(-(t/t2)^p), p bounded to [0.5, 3]
    sine           : a * sin(k x) (+ optional offset)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

MAX_NFEV = 500
FIT_TOL = 1e-10


@dataclass(frozen=True)
class CurveFitResult:
    params: np.ndarray
    stderr: np.ndarray
    residual_rms: float
    converged: bool
    param_names: tuple = ()

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.param_names, (float(p) for p in self.params)))

    def stderr_dict(self) -> dict[str, float]:
        return dict(zip(self.param_names, (float(s) for s in self.stderr)))


def _finish(res, n_pts: int, names, rms_bound: float | None = None) -> CurveFitResult:
    rms = math.sqrt(2.0 * res.cost / n_pts) if n_pts else 0.0
    m = len(res.x)
    # covariance from J^T J, guarded against rank deficiency
    stderr = np.full(m, np.nan)
    try:
        jtj = res.jac.T @ res.jac
        cov = np.linalg.inv(jtj) * (2.0 * res.cost / max(n_pts - m, 1))
        stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        pass
    converged = bool(res.success)
    if rms_bound is not None:
        converged = converged and rms <= rms_bound
    return CurveFitResult(res.x, stderr, rms, converged, tuple(names))


def _solve(resid, x0, names, n_pts, bounds=None, rms_bound=None) -> CurveFitResult:
    kwargs = dict(xtol=FIT_TOL, ftol=FIT_TOL, gtol=FIT_TOL, max_nfev=MAX_NFEV)
    if bounds is not None:
        res = least_squares(resid, x0, bounds=bounds, **kwargs)
    else:
        res = least_squares(resid, x0, **kwargs)
    return _finish(res, n_pts, names, rms_bound)


def lorentzian_dip(x, x0, fwhm, depth, baseline):
    hw = fwhm / 2.0
    return baseline - depth * hw * hw / ((x - x0) ** 2 + hw * hw)


def fit_lorentzian(x, y, rms_bound: float | None = None) -> CurveFitResult:
    """Fit a single Lorentzian dip.

    Seeds: x0 at the minimum sample, baseline from the edge samples,
    depth from the dip, width from the half-depth crossings.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 8:
        raise ValueError("need at least 8 points for a 4-parameter fit")
    i0 = int(np.argmin(y))
    baseline = 0.5 * (np.median(y[: max(len(y) // 10, 2)]) + np.median(y[-max(len(y) // 10, 2):]))
    depth = baseline - y[i0]
    half = baseline - depth / 2.0
    below = np.where(y < half)[0]
    if len(below) >= 2:
        fwhm = abs(x[below[-1]] - x[below[0]])
    else:
        fwhm = abs(x[-1] - x[0]) / 10.0
    fwhm = max(fwhm, abs(x[1] - x[0]))

    def resid(p):
        return lorentzian_dip(x, *p) - y

    return _solve(resid, [x[i0], fwhm, depth, baseline], ("x0", "fwhm", "depth", "baseline"), len(x), rms_bound=rms_bound)


def damped_sine(t, a, tau_d, f, c):
    return a * np.exp(-t / tau_d) * np.cos(2.0 * math.pi * f * t) + c


def fit_damped_sine(t, y, rms_bound: float | None = None) -> CurveFitResult:
    """Fit a * exp(-t/tau_d) cos(2 pi f t) + c; frequency seeded from the
    discrete Fourier peak of the mean-subtracted data."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 8:
        raise ValueError("need at least 8 points for a 4-parameter fit")
    c0 = float(np.mean(y))
    a0 = float(np.max(y) - np.min(y)) / 2.0
    f0 = _fourier_peak_freq(t, y - c0)
    span = t[-1] - t[0] if t[-1] > t[0] else 1.0

    def resid(p):
        return damped_sine(t, *p) - y

    return _solve(
        resid,
        [a0, 2.0 * span, f0, c0],
        ("a", "tau_d", "f", "c"),
        len(t),
        bounds=([0.0, 1e-3 * span, 0.0, -np.inf], [np.inf, np.inf, np.inf, np.inf]),
        rms_bound=rms_bound,
    )


def _fourier_peak_freq(t, y) -> float:
    """Dominant frequency on a uniform grid (DC excluded)."""
    n = len(t)
    dt = (t[-1] - t[0]) / (n - 1)
    spec = np.abs(np.fft.rfft(y))
    spec[0] = 0.0
    k = int(np.argmax(spec))
    return k / (n * dt) if dt > 0 else 1.0


def stretched_exp(t, a, t2, p):
    out = np.zeros_like(np.asarray(t, dtype=float))
    pos = t > 0
    out[pos] = a * np.exp(-((t[pos] / t2) ** p))
    out[~pos] = a
    return out


def fit_stretched_exp(t, y, rms_bound: float | None = None) -> CurveFitResult:
    """Fit a exp(-(t/t2)^p) with p in [0.5, 3].

    Seeds from a log-log linear regression of -ln(y/a0) on ln t using the
    points with 0.05 a0 < y < 0.95 a0.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 6:
        raise ValueError("need at least 6 points for a 3-parameter fit")
    a0 = float(np.max(y))
    if a0 <= 0:
        raise ValueError("data has no positive values to fit a decay")
    sel = (y > 0.05 * a0) & (y < 0.95 * a0) & (t > 0)
    if np.count_nonzero(sel) >= 2:
        lx = np.log(t[sel])
        ly = np.log(-np.log(np.clip(y[sel] / a0, 1e-12, 1.0 - 1e-12)))
        p0, intercept = np.polyfit(lx, ly, 1)
        t2_0 = math.exp(-intercept / p0) if p0 != 0 else t[-1]
        p0 = min(max(p0, 0.5), 3.0)
    else:
        # decay not resolved inside the sweep; seed at the sweep edge
        p0, t2_0 = 1.0, t[-1] if t[-1] > 0 else 1.0
    t2_0 = min(max(t2_0, t[t > 0].min() / 10.0), t[-1] * 100.0)

    def resid(q):
        return stretched_exp(t, *q) - y

    return _solve(
        resid,
        [a0 if a0 > 0 else 1.0, t2_0, p0],
        ("a", "t2", "p"),
        len(t),
        bounds=([0.0, t[t > 0].min() / 100.0, 0.5], [np.inf, t[-1] * 1e3, 3.0]),
        rms_bound=rms_bound,
    )


def sine_through_origin(x, a, k):
    return a * np.sin(k * x)


def fit_sine(x, y, with_offset: bool = False, rms_bound: float | None = None) -> CurveFitResult:
    """Fit a sin(k x) (optionally + c), seeded from the Fourier peak over
    the sweep, falling back to a quarter-period guess for short sweeps."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 6:
        raise ValueError("need at least 6 points")
    a0 = float(np.max(np.abs(y)))
    a0 = a0 if a0 > 0 else 1.0
    span = x[-1] - x[0]
    f0 = _fourier_peak_freq(x, y - (np.mean(y) if with_offset else 0.0))
    k0 = 2.0 * math.pi * f0
    if k0 * span < math.pi / 2.0:
        k0 = math.pi / (2.0 * max(abs(x[-1]), abs(x[0]), 1e-300))
    # sign of a from the small-argument slope
    i = np.argsort(np.abs(x))[: max(3, len(x) // 4)]
    if len(i) >= 2 and np.ptp(x[i]) > 0:
        slope = np.polyfit(x[i], y[i], 1)[0]
        a0 = math.copysign(a0, slope if slope != 0 else 1.0)

    if with_offset:
        def resid(p):
            return p[0] * np.sin(p[1] * x) + p[2] - y

        return _solve(resid, [a0, k0, float(np.mean(y))], ("a", "k", "c"), len(x), rms_bound=rms_bound)

    def resid(p):
        return sine_through_origin(x, *p) - y

    return _solve(resid, [a0, k0], ("a", "k"), len(x), rms_bound=rms_bound)
