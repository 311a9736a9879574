"""Quasi-static microwave field maps for the three driver geometries.

At ~2.8 GHz the free-space wavelength (~0.1 m) is far larger than the
mm-scale structures, so magnetostatics with a resonance-enhanced current
amplitude captures the field shapes.  Geometries, in a common frame:

* cwr  : center strip of width w along y in the z=0 plane carrying +I,
         flanked by two ground strips carrying -I/2 each (returns).
* ring : circular loop of radius R in the z=0 plane centered on the origin.
* wire : straight wire along y at the origin.

All calculators return Tesla per ampere times the geometry shape; maps
are stored per sqrt(W) of drive power so amplitudes scale as sqrt(P).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ellipe, ellipk

from .constants import GAMMA_E, LINE_IMPEDANCE_OHM, MU_0

KINDS = ("cwr", "ring", "wire")


@dataclass(frozen=True)
class ResonatorSpec:
    """Driver geometry, resonance parameters, and drive power."""

    kind: str
    f0_hz: float = 2.832e9
    q_factor: float = 27.0
    drive_power_w: float = 50.0
    strip_width_m: float = 1.0e-3
    gap_m: float = 0.5e-3
    ground_width_m: float = 1.0e-3
    ring_radius_m: float = 2.0e-3
    wire_diameter_m: float = 20.0e-6
    standoff_m: float = 2.0e-4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        for name in (
            "f0_hz",
            "q_factor",
            "drive_power_w",
            "strip_width_m",
            "gap_m",
            "ground_width_m",
            "ring_radius_m",
            "wire_diameter_m",
            "standoff_m",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def resonant(self) -> bool:
        # A plain wire is a broadband short: no resonant current build-up.
        return self.kind in ("cwr", "ring")


def resonance_enhancement(f: float, f0: float, q: float):
    """Normalized Lorentzian power response, 1 at f0, FWHM = f0/q."""
    if f0 <= 0 or q <= 0:
        raise ValueError("f0 and q must be > 0")
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("f must be > 0")
    x = 2.0 * q * (f - f0) / f0
    out = 1.0 / (1.0 + x * x)
    return float(out) if out.ndim == 0 else out


def peak_current_per_sqrt_watt(spec: ResonatorSpec, f_hz: float | None = None) -> float:
    """Peak drive current per sqrt(W): I = sqrt(2 P E / Z0) / sqrt(P).

    E is the resonant power enhancement (Q * Lorentzian) for resonant
    structures and the bare Lorentzian-free unity for the wire.
    """
    if f_hz is None:
        f_hz = spec.f0_hz
    enh = 1.0
    if spec.resonant:
        enh = spec.q_factor * float(resonance_enhancement(f_hz, spec.f0_hz, spec.q_factor))
    return math.sqrt(2.0 * enh / LINE_IMPEDANCE_OHM)


def field_of_wire(current: float, distance: float, wire_radius: float = 0.0) -> float:
    """|B| of an infinite straight wire: mu0 I / (2 pi d)."""
    if distance <= wire_radius:
        raise ValueError("query point inside the conductor")
    return MU_0 * current / (2.0 * math.pi * distance)


def wire_field_2d(current: float, x, z, x0: float = 0.0, z0: float = 0.0):
    """(Bx, Bz) of a wire along y at (x0, z0) carrying +I along +y."""
    dx = np.asarray(x, dtype=float) - x0
    dz = np.asarray(z, dtype=float) - z0
    r2 = dx * dx + dz * dz
    pref = MU_0 * current / (2.0 * math.pi)
    return pref * dz / r2, -pref * dx / r2


def field_of_strip(width: float, current: float, point) -> np.ndarray:
    """(Bx, Bz) of an infinitesimally thin strip of uniform surface current.

    Strip spans |x| <= width/2 at z = 0, current +I along +y; the wire
    solution integrated across the width in closed form.
    """
    x, z = float(point[0]), float(point[1])
    a = width / 2.0
    if z == 0.0 and abs(x) <= a:
        raise ValueError("query point on the conductor")
    K = MU_0 * current / (2.0 * math.pi * width)
    if z == 0.0:
        # in-plane but off strip: Bx vanishes by symmetry
        bx = 0.0
    else:
        bx = K * (math.atan2(x + a, z) - math.atan2(x - a, z))
    bz = -0.5 * K * math.log(((x + a) ** 2 + z * z) / ((x - a) ** 2 + z * z))
    return np.array([bx, bz])


def field_of_ring(radius: float, current: float, point, wire_radius: float = 0.0) -> np.ndarray:
    """(Bx, By, Bz) of a circular loop in the z=0 plane via elliptic integrals."""
    x, y, z = (float(c) for c in point)
    rho = math.hypot(x, y)
    d_to_wire = math.hypot(rho - radius, z)
    if d_to_wire <= wire_radius or d_to_wire == 0.0:
        raise ValueError("query point on the conductor")
    a = radius
    if rho < 1e-12 * a:
        bz = MU_0 * current * a * a / (2.0 * (a * a + z * z) ** 1.5)
        return np.array([0.0, 0.0, bz])
    denom = (a + rho) ** 2 + z * z
    m = 4.0 * a * rho / denom
    Km = float(ellipk(m))
    Em = float(ellipe(m))
    pref = MU_0 * current / (2.0 * math.pi * math.sqrt(denom))
    sub = (a - rho) ** 2 + z * z
    bz = pref * (Km + Em * (a * a - rho * rho - z * z) / sub)
    brho = pref * (z / rho) * (-Km + Em * (a * a + rho * rho + z * z) / sub)
    return np.array([brho * x / rho, brho * y / rho, bz])


def _cwr_field_2d(spec: ResonatorSpec, current: float, x, z):
    """CWR cross-section field: center strip +I, two ground strips -I/2."""
    w, g, wg = spec.strip_width_m, spec.gap_m, spec.ground_width_m
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    bx = np.zeros(np.broadcast(x, z).shape)
    bz = np.zeros_like(bx)
    offset = w / 2.0 + g + wg / 2.0
    for x0, I, ww in ((0.0, current, w), (offset, -current / 2.0, wg), (-offset, -current / 2.0, wg)):
        sx, sz = _strip_field_grid(ww, I, x - x0, z)
        bx += sx
        bz += sz
    return bx, bz


def _strip_field_grid(width, current, x, z):
    """Vectorized thin-strip field; singular on-conductor points -> nan."""
    a = width / 2.0
    K = MU_0 * current / (2.0 * math.pi * width)
    with np.errstate(divide="ignore", invalid="ignore"):
        bx = K * (np.arctan2(x + a, z) - np.arctan2(x - a, z))
        bz = -0.5 * K * np.log(((x + a) ** 2 + z * z) / ((x - a) ** 2 + z * z))
    on = (np.abs(z) == 0.0) & (np.abs(x) <= a)
    bx = np.where(on, np.nan, bx)
    bz = np.where(on, np.nan, bz)
    return bx, bz


@dataclass(frozen=True)
class FieldMap:
    """Microwave field amplitude on a regular (u, v) cross-section grid.

    u is the lateral coordinate, v the height above the structure plane.
    b_u/b_v are the in-plane field components in T per sqrt(W); the wire
    and cwr are invariant along y (u = x), the ring is axisymmetric
    (u = signed radius in the x-z plane used for profiles/export).
    """

    kind: str
    u: np.ndarray
    v: np.ndarray
    b_u: np.ndarray
    b_v: np.ndarray

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.b_u, self.b_v)

    def interpolate(self, points: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of (Bu, Bv) at (n, 3) xyz points, T/sqrt(W).

        Points are mapped into the (u, v) plane per geometry; raises if any
        point falls outside the grid.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.kind == "ring":
            u = np.hypot(pts[:, 0], pts[:, 1])
        else:
            u = pts[:, 0]
        v = pts[:, 2]
        if (
            u.min() < self.u[0]
            or u.max() > self.u[-1]
            or v.min() < self.v[0]
            or v.max() > self.v[-1]
        ):
            raise ValueError("field map does not cover the requested points")
        iu = np.clip(np.searchsorted(self.u, u) - 1, 0, len(self.u) - 2)
        iv = np.clip(np.searchsorted(self.v, v) - 1, 0, len(self.v) - 2)
        fu = (u - self.u[iu]) / (self.u[iu + 1] - self.u[iu])
        fv = (v - self.v[iv]) / (self.v[iv + 1] - self.v[iv])
        out = np.empty((len(pts), 2))
        for j, comp in enumerate((self.b_u, self.b_v)):
            c00 = comp[iu, iv]
            c10 = comp[iu + 1, iv]
            c01 = comp[iu, iv + 1]
            c11 = comp[iu + 1, iv + 1]
            out[:, j] = (
                c00 * (1 - fu) * (1 - fv)
                + c10 * fu * (1 - fv)
                + c01 * (1 - fu) * fv
                + c11 * fu * fv
            )
        return out

    def to_csv(self) -> str:
        """Grid export with columns x_m, y_m, z_m, Bx_T, By_T, Bz_T, Babs_T.

        The cross-section plane is written as y = 0 with u -> x, v -> z;
        amplitudes are per sqrt(W).
        """
        buf = io.StringIO()
        buf.write("x_m,y_m,z_m,Bx_T,By_T,Bz_T,Babs_T\n")
        for i, uu in enumerate(self.u):
            for j, vv in enumerate(self.v):
                bu = self.b_u[i, j]
                bv = self.b_v[i, j]
                babs = math.hypot(bu, bv)
                buf.write(f"{uu!r},0.0,{vv!r},{bu!r},0.0,{bv!r},{babs!r}\n")
        return buf.getvalue()


def compute_field_map(
    spec: ResonatorSpec,
    u_extent: float | None = None,
    v_range: tuple[float, float] | None = None,
    n_u: int = 201,
    n_v: int = 81,
) -> FieldMap:
    """Evaluate the geometry's field on a regular grid, per sqrt(W) of drive."""
    ipk = peak_current_per_sqrt_watt(spec)
    if u_extent is None:
        u_extent = {
            "cwr": spec.strip_width_m + 2 * (spec.gap_m + spec.ground_width_m),
            "ring": 2.0 * spec.ring_radius_m,
            "wire": 2.0e-3,
        }[spec.kind]
    if v_range is None:
        v_range = (0.5 * spec.standoff_m, 4.0 * spec.standoff_m)
    u = np.linspace(-u_extent, u_extent, n_u)
    v = np.linspace(v_range[0], v_range[1], n_v)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    if spec.kind == "cwr":
        bu, bv = _cwr_field_2d(spec, ipk, uu, vv)
    elif spec.kind == "wire":
        bu, bv = wire_field_2d(ipk, uu, vv)
        inside = np.hypot(uu, vv) <= spec.wire_diameter_m / 2.0
        bu = np.where(inside, np.nan, bu)
        bv = np.where(inside, np.nan, bv)
    else:
        bu = np.empty_like(uu)
        bv = np.empty_like(uu)
        for i in range(uu.shape[0]):
            for j in range(uu.shape[1]):
                bvec = field_of_ring(spec.ring_radius_m, ipk, (uu[i, j], 0.0, vv[i, j]))
                bu[i, j] = bvec[0]
                bv[i, j] = bvec[2]
    return FieldMap(spec.kind, u, v, bu, bv)


def rabi_map(field_map: FieldMap, nv_axis, gamma_e: float = GAMMA_E):
    """Local Rabi angular frequency per sqrt(W): Omega = gamma |B1_perp| / 2.

    The factor 1/2 is the rotating-wave reduction of a linearly polarized
    drive.  Returns an array shaped like the map grid; components along
    the ring azimuth vanish on the u-v plane so the in-plane vector is
    the full transverse field for all three geometries.
    """
    axis = np.asarray(nv_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    # in-plane field vector (u, 0, v) in the cross-section frame
    bx, by, bz = field_map.b_u, np.zeros_like(field_map.b_u), field_map.b_v
    bpar = bx * axis[0] + by * axis[1] + bz * axis[2]
    bperp2 = bx * bx + by * by + bz * bz - bpar * bpar
    return gamma_e * np.sqrt(np.maximum(bperp2, 0.0)) / 2.0


def rabi_from_b_vectors(b_vectors: np.ndarray, nv_axis, gamma_e: float = GAMMA_E) -> np.ndarray:
    """Omega for explicit field vectors (n, 3); same convention as rabi_map."""
    axis = np.asarray(nv_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    b = np.asarray(b_vectors, dtype=float)
    bpar = b @ axis
    bperp2 = np.sum(b * b, axis=-1) - bpar**2
    return gamma_e * np.sqrt(np.maximum(bperp2, 0.0)) / 2.0
