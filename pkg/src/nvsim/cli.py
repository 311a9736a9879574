"""Config-driven command line: `simulate run|validate|fieldmap <config>`.

Exit codes: 0 success, 2 config error, 3 numerical failure
(non-convergent primary fit, calibration bracket failure,
non-integrable spectrum).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, format_manifest, parse_config, validate_config
from .ensemble import DetectionVolume, NoiseModel, sample_ensemble
from .experiments import (
    run_ac_magnetometry,
    run_coherence,
    run_odmr,
    run_rabi,
    run_resolution,
    write_curve_csv,
    write_fit_csv,
    write_sensitivity_csv,
    write_shots_csv,
)
from .fields import ResonatorSpec, compute_field_map
from .noise import AmplitudeErrorModel, OUBath, QuasiStaticSpread, calibrate_bath, sigma_from_t2star
from .readout import ReadoutModel, simulate_shot_stream


class NumericalFailure(RuntimeError):
    pass


def build_bath(cfg: RunConfig) -> OUBath:
    if cfg.bath_b_rad_s > 0:
        return OUBath(cfg.bath_b_rad_s, cfg.bath_tau_c_s)
    return calibrate_bath(cfg.t2_echo_target_s, cfg.bath_tau_c_s)


def build_readout(cfg: RunConfig) -> ReadoutModel:
    return ReadoutModel(
        v0_v=cfg.v0_v,
        contrast=cfg.contrast,
        s_window_s=cfg.s_window_s,
        r_window_s=cfg.r_window_s,
        laser_pulse_s=cfg.laser_pulse_s,
        shot_noise_v=cfg.shot_noise_v,
        laser_fluct_rel=cfg.laser_fluct_rel,
        laser_fluct_fast_rel=cfg.laser_fluct_fast_rel,
        laser_drift_step_rel=cfg.laser_drift_step_rel,
    )


def build_resonator_spec(cfg: RunConfig) -> ResonatorSpec:
    return ResonatorSpec(
        kind=cfg.resonator if cfg.resonator != "uniform" else "cwr",
        f0_hz=cfg.f0_hz,
        q_factor=cfg.q_factor,
        drive_power_w=cfg.drive_power_w,
        strip_width_m=cfg.strip_width_m,
        gap_m=cfg.gap_m,
        ground_width_m=cfg.ground_width_m,
        ring_radius_m=cfg.ring_radius_m,
        wire_diameter_m=cfg.wire_diameter_m,
        standoff_m=cfg.standoff_m,
    )


def build_ensemble(cfg: RunConfig):
    volume = DetectionVolume(
        beam_diameter_m=cfg.beam_diameter_m,
        depth_m=cfg.depth_m,
        standoff_m=cfg.standoff_m,
        quoted_volume_m3=cfg.volume_mm3 * 1e-9,
    )
    noise_model = NoiseModel(
        QuasiStaticSpread(sigma_from_t2star(cfg.t2_star_s)),
        build_bath(cfg),
        AmplitudeErrorModel(cfg.amp_error_sigma, cfg.amp_error_systematic),
    )
    if cfg.resonator == "uniform":
        ens = sample_ensemble(
            volume,
            None,
            noise_model,
            cfg.n_spins,
            cfg.seed,
            rabi_angular_freq=math.pi / cfg.pi_time_s,
        )
    else:
        fmap = compute_field_map(build_resonator_spec(cfg))
        ens = sample_ensemble(
            volume, fmap, noise_model, cfg.n_spins, cfg.seed, drive_power_w=cfg.drive_power_w
        )
    return ens, noise_model


def _pulse_width(cfg: RunConfig):
    return cfg.pi_time_s if cfg.finite_pulses else None


def run_experiment(cfg: RunConfig, out: Path) -> dict[str, str]:
    """Dispatch one experiment; returns manifest entries for the outputs."""
    outputs: dict[str, str] = {}

    def curve_path(name="curve.csv"):
        p = out / name
        outputs[f"output_{name.split('.')[0]}"] = str(p)
        return p

    if cfg.experiment == "fieldmap":
        spec = build_resonator_spec(cfg)
        fmap = compute_field_map(spec)
        path = curve_path("fieldmap.csv")
        path.write_text(fmap.to_csv())
        return outputs

    if cfg.experiment == "odmr":
        freqs = np.linspace(cfg.f_min_hz, cfg.f_max_hz, cfg.n_freq)
        res = run_odmr(
            freqs,
            cfg.bias_field_t,
            cfg.odmr_linewidth_hz,
            contrast_aligned=cfg.contrast,
            contrast_misaligned=cfg.odmr_contrast_misaligned,
            v0_v=cfg.v0_v,
        )
        write_curve_csv(curve_path(), ["freq_hz", "signal_v"], [res.freqs_hz, res.signal])
        write_fit_csv(out / "fit.csv", res.fit, {"fitted_dip_hz": res.fitted_dip_hz})
        outputs["output_fit"] = str(out / "fit.csv")
        if not res.fit.converged:
            raise NumericalFailure("ODMR dip fit did not converge")
        return outputs

    ens, noise_model = build_ensemble(cfg)

    if cfg.experiment == "rabi":
        durations = np.linspace(0.0, cfg.rabi_max_s, cfg.n_points)
        res = run_rabi(durations, ens, build_readout(cfg) if cfg.shots > 1 else None,
                       shots=cfg.shots if cfg.shots > 1 else 0, seed=cfg.seed + 1)
        write_curve_csv(curve_path(), ["duration_s", "population"], [res.durations_s, res.population])
        write_fit_csv(out / "fit.csv", res.fit, {"t_pi_s": res.t_pi_s})
        outputs["output_fit"] = str(out / "fit.csv")
        if not res.fit.converged:
            raise NumericalFailure("Rabi damped-sine fit did not converge")
        return outputs

    if cfg.experiment in ("fid", "echo", "cpmg", "xy4", "xy8", "xy16"):
        t_sweep = np.linspace(cfg.t_min_s, cfg.t_max_s, cfg.n_points)
        res = run_coherence(
            cfg.experiment,
            cfg.n_repeats,
            t_sweep,
            ens,
            noise_model.bath,
            pulse_width=_pulse_width(cfg),
            noise_seed=cfg.seed + 2,
            threads=cfg.threads,
        )
        write_curve_csv(curve_path(), ["t_total_s", "signal_norm"], [res.t_totals_s, res.signal_norm])
        write_fit_csv(
            out / "fit.csv",
            res.fit,
            {"t2_s": res.t2_s, "stretch_p": res.stretch_p, "censored": float(res.censored)},
        )
        outputs["output_fit"] = str(out / "fit.csv")
        if not res.fit.converged:
            raise NumericalFailure("coherence fit did not converge")
        return outputs

    if cfg.experiment == "ac_sense":
        from .sequences import build_xy16

        tau = cfg.tau_s if cfg.tau_s > 0 else 1.0 / (2.0 * cfg.f_ac_hz)
        seq = build_xy16(cfg.n_repeats, tau, readout_phase=math.pi / 2.0)
        amplitudes = np.linspace(-cfg.b_ac_max_t, cfg.b_ac_max_t, cfg.n_amplitudes)
        res = run_ac_magnetometry(
            seq,
            cfg.f_ac_hz,
            amplitudes,
            ens,
            noise_model.bath,
            build_readout(cfg),
            cfg.shots,
            cfg.t_seq_s,
            ac_phase=cfg.ac_phase_rad,
            noise_seed=cfg.seed + 3,
            shot_seed=cfg.seed + 4,
            threads=cfg.threads,
        )
        write_curve_csv(
            curve_path(),
            ["b_ac_t", "signal_v", "signal_std_v", "signal_norm"],
            [res.amplitudes_t, res.signal_mean_v, res.signal_std_v, res.signal_norm],
        )
        write_fit_csv(out / "fit.csv", res.fit, {"max_slope_v_per_t": res.max_slope_v_per_t})
        write_sensitivity_csv(out / "report.csv", res.report)
        outputs["output_fit"] = str(out / "fit.csv")
        outputs["output_report"] = str(out / "report.csv")
        if cfg.dump_shots:
            rng = np.random.default_rng(cfg.seed + 5)
            stream = simulate_shot_stream(0.5, 0.5, build_readout(cfg), min(cfg.shots, 10000), rng)
            write_shots_csv(out / "shots.csv", stream)
            outputs["output_shots"] = str(out / "shots.csv")
        if not res.fit.converged:
            raise NumericalFailure("AC sine fit did not converge")
        return outputs

    if cfg.experiment == "resolution":
        from .sequences import build_xy16

        tau = cfg.tau_s if cfg.tau_s > 0 else 1.0 / (2.0 * cfg.f_ac_hz)
        seq = build_xy16(cfg.n_repeats, tau, readout_phase=math.pi / 2.0)
        amplitudes = np.linspace(-cfg.b_ac_max_t, cfg.b_ac_max_t, cfg.n_amplitudes)
        ac = run_ac_magnetometry(
            seq,
            cfg.f_ac_hz,
            amplitudes,
            ens,
            noise_model.bath,
            build_readout(cfg),
            max(cfg.shots, 2),
            cfg.t_seq_s,
            ac_phase=cfg.ac_phase_rad,
            noise_seed=cfg.seed + 3,
            shot_seed=cfg.seed + 4,
            threads=cfg.threads,
        )
        m_list = np.unique(
            np.round(np.geomspace(cfg.m_min, cfg.m_max, cfg.m_points)).astype(int)
        )
        res = run_resolution(
            build_readout(cfg),
            ac.max_slope_v_per_t,
            cfg.t_seq_s,
            m_list,
            blocks_per_point=cfg.blocks_per_point,
            seed=cfg.seed + 6,
        )
        write_curve_csv(
            curve_path("resolution.csv"),
            ["n_avg", "elapsed_s", "min_field_t", "ideal_min_field_t"],
            [res.n_avg.astype(float), res.elapsed_s, res.min_field_t, res.ideal_min_field_t],
        )
        write_sensitivity_csv(out / "report.csv", ac.report)
        outputs["output_report"] = str(out / "report.csv")
        outputs["loglog_slope"] = repr(res.loglog_slope)
        return outputs

    raise ConfigError(f"key 'experiment': unhandled kind {cfg.experiment!r}")


def cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        if args.out is not None:
            cfg.out_dir = args.out
        warnings = validate_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        outputs = run_experiment(cfg, out)
    except (NumericalFailure, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    extra = {"version": __version__, "wall_time_s": f"{time.time() - t0:.3f}", **outputs}
    (out / "manifest.txt").write_text(format_manifest(cfg, extra))
    print(f"wrote {out}/manifest.txt")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = parse_config(args.config)
        warnings = validate_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for w in warnings:
        print(f"warning: {w}")
    print("ok")
    print("resolved configuration:")
    from .config import config_items

    for k, v in config_items(cfg):
        print(f"  {k} = {v}")
    return 0


def cmd_fieldmap(args) -> int:
    try:
        cfg = parse_config(args.config)
        if args.out is not None:
            cfg.out_dir = args.out
        if cfg.resonator == "uniform":
            raise ConfigError("key 'resonator': fieldmap requires cwr, ring, or wire")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmap = compute_field_map(build_resonator_spec(cfg))
    (out / "fieldmap.csv").write_text(fmap.to_csv())
    print(f"wrote {out}/fieldmap.csv")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="simulate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by the config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=None)
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="schema and physics sanity report, no run")
    p_val.add_argument("config")
    p_val.set_defaults(func=cmd_validate)

    p_map = sub.add_parser("fieldmap", help="export the resonator field map CSV")
    p_map.add_argument("config")
    p_map.add_argument("--out", default=None)
    p_map.set_defaults(func=cmd_fieldmap)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
