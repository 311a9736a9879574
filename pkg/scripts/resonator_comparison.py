#!/usr/bin/env python3
"""Lateral drive-field profiles of the three resonator geometries at the
sample standoff, per sqrt(W) of drive power (columns x_m then one column
per geometry)."""

import argparse
from pathlib import Path

import numpy as np

from nvsim.experiments import write_curve_csv
from nvsim.fields import ResonatorSpec, compute_field_map


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--standoff", type=float, default=2e-4)
    ap.add_argument("--extent", type=float, default=1.5e-3)
    ap.add_argument("--out", default="out/resonator_profiles.csv")
    args = ap.parse_args()

    xs = np.linspace(-args.extent, args.extent, 241)
    cols = {"x_m": xs}
    for kind in ("cwr", "ring", "wire"):
        spec = ResonatorSpec(kind, standoff_m=args.standoff)
        m = compute_field_map(
            spec, u_extent=args.extent, v_range=(0.9 * args.standoff, 1.1 * args.standoff),
            n_u=241, n_v=5,
        )
        iz = int(np.argmin(np.abs(m.v - args.standoff)))
        mag = m.magnitude()[:, iz]
        cols[f"b_{kind}_t_per_sqrt_w"] = np.interp(xs, m.u, mag)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out, list(cols.keys()), list(cols.values()))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
