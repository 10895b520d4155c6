"""INI configuration with typed defaults.

Resolution order is defaults < config file < command-line overrides. Every
key must already exist in :data:`DEFAULTS`; its default fixes the type.
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional

DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {"seed": 0},
    "synth": {
        "scenario": "default",
        "texture": "grating",
        "duration_s": 5.0,
        "imu_rate_hz": 2000.0,
        "imu_noise_sd": 0.5,
    },
    "vibration": {"amplitude_m": 200e-6, "frequency_hz": 30.0, "phase_rad": 0.0, "u": 1.0},
    "elastomer": {"E_pa": 0.2e6, "eta_pas": 0.2e6 / (2 * math.pi * 50.0)},
    "bandpass": {"relative_bandwidth": 0.4, "order": 2},
    "sensor": {"sensitivity": "mid", "width": 64, "height": 64, "refractory_us": 0, "noise_rate": 0.1},
    "reconstruction": {"rate_hz": 500, "background_filter": False, "filter_radius": 1,
                       "filter_window_us": 2000},
    "calibration": {"rate_hz": 500, "segment_us": 2_000_000, "iq_thresh": "mean", "mode": "magnitude",
                    "band_low": -math.inf, "band_high": math.inf, "block": 512},
    "metrics": {"ssim_window": 8, "dilation_radius": 2},
    "contact": {"rate_hz": 100, "calibration_rate_hz": 500, "profile_depth": 4, "min_region": 12,
                "hole_fraction": 0.02, "gated": True},
    "force": {"k": 5, "n_segments": 36, "frames_per_segment": 10, "max_offset_px": 6.0,
              "noise_fraction": 0.05, "canny_sigma": 1.5, "canny_low": 0.1, "canny_high": 0.3},
    # placeholder robot values; the real ones are unpublished
    "locomotion": {"p": 0.03, "m": 1.5, "g": 9.81, "mu_eff": 3.0, "F_p": 4.0, "mobility": 4e-3,
                   "screw_thrust": 4.0, "stroke": 0.01, "cycle_time": 1.0, "alpha_min": -0.5,
                   "alpha_max": 0.5, "alpha_steps": 11, "F_p_max": 8.0, "F_p_steps": 9},
    "steering": {"quant_bins": 8, "force_threshold": 0.2, "trigger_rate_hz": 1.0, "step_deg": 30.0},
    "datarate": {"window_us": 100_000, "bytes_per_event": 8, "frame_rate_hz": 120.0,
                 "bytes_per_pixel": 1},
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Invalid configuration, reported against a ``section.key`` field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


def _coerce(field: str, raw: Any, default: Any) -> Any:
    if not isinstance(raw, str):
        raw = str(raw)
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if isinstance(default, int):
            return int(raw, 0)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        kind = type(default).__name__
        msg = str(exc) if isinstance(default, bool) else f"expected {kind}, got {raw!r}"
        raise ConfigError(field, msg) from None
    return raw


class Config:
    """Resolved configuration; ``explicit`` lists keys set by file or flags."""

    def __init__(self, values: Optional[dict] = None, explicit: Iterable[str] = ()):
        self.values = copy.deepcopy(DEFAULTS) if values is None else values
        self.explicit = set(explicit)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.values[section]

    def get(self, key: str) -> Any:
        section, name = key.split(".", 1)
        return self.values[section][name]

    def is_set(self, key: str) -> bool:
        return key in self.explicit

    def set(self, key: str, raw: Any) -> None:
        if "." not in key:
            raise ConfigError(key, "expected section.key")
        section, name = key.split(".", 1)
        if section not in DEFAULTS:
            raise ConfigError(key, f"unknown section {section!r}")
        if name not in DEFAULTS[section]:
            raise ConfigError(key, f"unknown key {name!r} in section [{section}]")
        self.values[section][name] = _coerce(key, raw, DEFAULTS[section][name])
        self.explicit.add(key)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def digest(self) -> str:
        """64-bit hex digest of the resolved values."""
        blob = json.dumps(self.values, sort_keys=True, default=repr, allow_nan=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def to_ini(self) -> str:
        lines = []
        for section, kv in self.values.items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in kv.items())
            lines.append("")
        return "\n".join(lines)


def load_config(path=None, overrides: Iterable[str] = ()) -> Config:
    """Defaults, then ``path`` (INI), then ``section.key=value`` overrides."""
    cfg = Config()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError("", f"{path}: {exc}") from None
        for section in parser.sections():
            for name, raw in parser.items(section):
                cfg.set(f"{section}.{name}", raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, raw = item.split("=", 1)
        cfg.set(key.strip(), raw)
    validate(cfg)
    return cfg


def validate(cfg: Config) -> None:
    """Range checks that do not depend on other modules."""
    positive = ["synth.duration_s", "synth.imu_rate_hz", "vibration.frequency_hz", "elastomer.E_pa",
                "bandpass.relative_bandwidth", "sensor.width", "sensor.height", "reconstruction.rate_hz",
                "calibration.rate_hz", "calibration.segment_us", "calibration.block", "metrics.ssim_window",
                "contact.rate_hz", "contact.calibration_rate_hz", "force.k", "force.n_segments",
                "force.frames_per_segment", "locomotion.p", "locomotion.m", "locomotion.g",
                "locomotion.stroke", "locomotion.cycle_time", "datarate.window_us",
                "datarate.bytes_per_event", "datarate.frame_rate_hz", "datarate.bytes_per_pixel"]
    for key in positive:
        v = cfg.get(key)
        if not v > 0:
            raise ConfigError(key, f"must be > 0, got {v!r}")
    nonneg = ["synth.imu_noise_sd", "vibration.amplitude_m", "elastomer.eta_pas", "sensor.refractory_us",
              "sensor.noise_rate", "metrics.dilation_radius", "locomotion.mu_eff", "locomotion.F_p",
              "locomotion.mobility", "locomotion.screw_thrust", "locomotion.F_p_max",
              "force.noise_fraction", "steering.force_threshold", "run.seed"]
    for key in nonneg:
        v = cfg.get(key)
        if not v >= 0:
            raise ConfigError(key, f"must be >= 0, got {v!r}")
    if cfg.get("run.seed") >= 2 ** 64:
        raise ConfigError("run.seed", "must fit in 64 bits")
    if cfg.get("bandpass.relative_bandwidth") >= 2:
        raise ConfigError("bandpass.relative_bandwidth", "must be < 2")
    if cfg.get("bandpass.order") < 1:
        raise ConfigError("bandpass.order", "must be >= 1")
    if cfg.get("sensor.sensitivity") not in ("low", "mid", "high"):
        raise ConfigError("sensor.sensitivity", "must be one of low, mid, high")
    if cfg.get("calibration.mode") not in ("magnitude", "signed_band"):
        raise ConfigError("calibration.mode", "must be magnitude or signed_band")
    thr = cfg.get("calibration.iq_thresh")
    if thr != "mean":
        try:
            float(thr)
        except ValueError:
            raise ConfigError("calibration.iq_thresh", f"expected 'mean' or a number, got {thr!r}") from None
    if cfg.get("steering.quant_bins") < 2:
        raise ConfigError("steering.quant_bins", "must be >= 2")
    for key in ("locomotion.alpha_min", "locomotion.alpha_max"):
        if abs(cfg.get(key)) > math.pi / 2:
            raise ConfigError(key, "must lie in [-pi/2, pi/2]")
    for key in ("locomotion.alpha_steps", "locomotion.F_p_steps"):
        if cfg.get(key) < 1:
            raise ConfigError(key, "must be >= 1")


def resolve_config_path(path: Optional[str], env: dict) -> Optional[Path]:
    """Explicit path, else ``VIBROTAC_CONFIG``, else none."""
    p = path or env.get("VIBROTAC_CONFIG") or None
    return Path(p) if p else None
