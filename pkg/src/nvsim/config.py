"""Plain-text key=value run configuration with unit-suffixed keys.

Unknown keys are rejected by name, values are typed and range-checked,
and a run is fully reproducible from (config, seed): the manifest echoes
every resolved key.  Keys carry their unit in the suffix (_s, _hz, _t,
_v, _m, _w, _rad, _rel, _mm3, _cm3); counts and labels are bare.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .noise import MAX_TAU_C_RATIO

EXPERIMENTS = ("odmr", "rabi", "fid", "echo", "cpmg", "xy4", "xy8", "xy16", "ac_sense", "resolution", "fieldmap")
RESONATORS = ("uniform", "cwr", "ring", "wire")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    # run
    experiment: str = "echo"
    seed: int = 20260809
    threads: int = 1
    shots: int = 2000
    out_dir: str = "out"
    dump_shots: bool = False
    # physics
    t2_star_s: float = 150e-9
    t2_echo_target_s: float = 9e-6
    bath_b_rad_s: float = 0.0          # 0 -> calibrate from t2_echo_target_s
    bath_tau_c_s: float = 10e-6
    pi_time_s: float = 48e-9
    contrast: float = 0.02
    v0_v: float = 0.5
    shot_noise_v: float = 5.77e-5
    laser_fluct_rel: float = 0.01
    laser_fluct_fast_rel: float = 0.0
    laser_drift_step_rel: float = 0.0
    amp_error_sigma: float = 0.0
    amp_error_systematic: float = 0.0
    finite_pulses: bool = False
    s_window_s: float = 10e-6
    r_window_s: float = 50e-6
    laser_pulse_s: float = 400e-6
    # sequence
    n_repeats: int = 16
    tau_s: float = 0.0                 # 0 -> derived (1/(2 f_ac) for ac_sense)
    t_min_s: float = 0.5e-6
    t_max_s: float = 20e-6
    n_points: int = 24
    f_ac_hz: float = 362e3
    ac_phase_rad: float = math.pi / 2.0
    b_ac_max_t: float = 40e-9
    n_amplitudes: int = 17
    t_seq_s: float = 1.47e-3
    # ensemble
    n_spins: int = 10000
    resonator: str = "uniform"
    beam_diameter_m: float = 30e-6
    depth_m: float = 0.3e-3
    standoff_m: float = 2.0e-4
    volume_mm3: float = 1.4e-3         # quoted detection volume (informational)
    nv_density_cm3: float = 5e18       # informational
    strip_width_m: float = 1.0e-3
    gap_m: float = 0.5e-3
    ground_width_m: float = 1.0e-3
    ring_radius_m: float = 2.0e-3
    wire_diameter_m: float = 20e-6
    f0_hz: float = 2.832e9
    q_factor: float = 27.0
    drive_power_w: float = 50.0
    # odmr
    bias_field_t: float = 2.0e-3
    odmr_linewidth_hz: float = 6e6
    odmr_contrast_misaligned: float = 0.005
    f_min_hz: float = 2.77e9
    f_max_hz: float = 2.97e9
    n_freq: int = 801
    # rabi
    rabi_max_s: float = 400e-9
    # resolution
    m_min: int = 100
    m_max: int = 100000
    m_points: int = 4
    blocks_per_point: int = 20


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

# keys that must be strictly positive / non-negative
_POSITIVE = {
    "t2_star_s", "t2_echo_target_s", "bath_tau_c_s", "pi_time_s", "contrast",
    "v0_v", "s_window_s", "r_window_s", "laser_pulse_s", "f_ac_hz", "t_seq_s",
    "beam_diameter_m", "depth_m", "standoff_m", "volume_mm3", "nv_density_cm3",
    "strip_width_m", "gap_m", "ground_width_m", "ring_radius_m", "wire_diameter_m",
    "f0_hz", "q_factor", "drive_power_w", "bias_field_t", "odmr_linewidth_hz",
    "rabi_max_s", "t_min_s", "t_max_s", "b_ac_max_t",
}
_NONNEGATIVE = {
    "bath_b_rad_s", "shot_noise_v", "laser_fluct_rel", "laser_fluct_fast_rel",
    "laser_drift_step_rel", "amp_error_sigma", "tau_s",
}
_MIN_ONE = {"threads", "shots", "n_repeats", "n_points", "n_amplitudes", "n_spins",
            "n_freq", "m_min", "m_max", "m_points", "blocks_per_point"}


def _parse_value(key: str, raw: str):
    typ = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if typ == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse {raw!r} as {typ}") from None


def parse_config_text(text: str, defaults: RunConfig | None = None) -> RunConfig:
    cfg = defaults or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key '{key}' (line {lineno})")
        setattr(cfg, key, _parse_value(key, raw))
    validate_config(cfg)
    return cfg


def parse_config(path: str) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def validate_config(cfg: RunConfig) -> list[str]:
    """Range/consistency checks; raises ConfigError, returns warnings."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"key 'experiment': {cfg.experiment!r} not in {EXPERIMENTS}")
    if cfg.resonator not in RESONATORS:
        raise ConfigError(f"key 'resonator': {cfg.resonator!r} not in {RESONATORS}")
    for key in _POSITIVE:
        if getattr(cfg, key) <= 0:
            raise ConfigError(f"key '{key}': must be > 0, got {getattr(cfg, key)}")
    for key in _NONNEGATIVE:
        if getattr(cfg, key) < 0:
            raise ConfigError(f"key '{key}': must be >= 0, got {getattr(cfg, key)}")
    for key in _MIN_ONE:
        if getattr(cfg, key) < 1:
            raise ConfigError(f"key '{key}': must be >= 1, got {getattr(cfg, key)}")
    if not (0.0 < cfg.contrast < 1.0):
        raise ConfigError(f"key 'contrast': must be in (0, 1), got {cfg.contrast}")
    if 1.0 + cfg.amp_error_systematic <= 0.0:
        raise ConfigError("key 'amp_error_systematic': 1 + value must be > 0")
    if cfg.s_window_s + cfg.r_window_s > cfg.laser_pulse_s:
        raise ConfigError("key 's_window_s': S and R windows exceed laser_pulse_s")
    if cfg.t_min_s >= cfg.t_max_s:
        raise ConfigError("key 't_min_s': must be < t_max_s")
    if cfg.m_min > cfg.m_max:
        raise ConfigError("key 'm_min': must be <= m_max")

    warnings = []
    if cfg.experiment == "ac_sense" and cfg.tau_s > 0:
        ideal = 1.0 / (2.0 * cfg.f_ac_hz)
        if abs(cfg.tau_s - ideal) > 0.01 * ideal:
            warnings.append(
                f"tau_s = {cfg.tau_s:g} s does not match 1/(2 f_ac_hz) = {ideal:g} s; "
                "the AC field will not be synchronized"
            )
    if cfg.finite_pulses and cfg.tau_s > 0 and cfg.pi_time_s >= cfg.tau_s:
        raise ConfigError("key 'pi_time_s': finite pulses overlap (pi_time_s >= tau_s)")
    if cfg.bath_tau_c_s > MAX_TAU_C_RATIO * cfg.t2_echo_target_s and cfg.bath_b_rad_s == 0.0:
        raise ConfigError(
            f"key 'bath_tau_c_s': exceeds {MAX_TAU_C_RATIO:g} * t2_echo_target_s; "
            "echo calibration rejected (quasi-static bath)"
        )
    if cfg.pi_time_s > cfg.t2_star_s / 2.0:
        warnings.append(
            f"pi_time_s = {cfg.pi_time_s:g} s is not small vs t2_star_s = {cfg.t2_star_s:g} s; "
            "pulses overlap significant dephasing"
        )
    return warnings


def config_items(cfg: RunConfig) -> list[tuple[str, str]]:
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            s = "true" if v else "false"
        elif isinstance(v, float):
            s = repr(v)
        else:
            s = str(v)
        out.append((f.name, s))
    return out


def format_manifest(cfg: RunConfig, extra: dict[str, str]) -> str:
    lines = [f"{k}={v}" for k, v in config_items(cfg)]
    lines += [f"{k}={v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"
