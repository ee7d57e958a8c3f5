"""Flat ``key = value`` experiment files.

Controller keys (``kp_angle``, ``kp_rate``, ...) apply to every axis and may
be overridden per axis with a prefix, e.g. ``roll.kp_rate = 0.12``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .control import AXES, AxisGains, CascadeGains, ExperimentConfig
from .errors import ConfigurationError
from .narx import Architecture, DelayConfig
from .plant import NoiseSpec, QuadrotorParams
from .signals import BandSpec, PrbsSpec, design_prbs_for_band
from .train import TrainingOptions


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


_REQUIRED = object()

GAIN_KEYS = ("kp_angle", "kp_rate", "ki_rate", "rate_cmd_limit", "torque_limit", "integral_limit")

# key -> (parser, default)
SCHEMA = {
    "axis": (_choice(*AXES, "all"), _REQUIRED),
    "duration_s": (float, _REQUIRED),
    "seed": (int, _REQUIRED),
    "arch": (_choice("sigmoid", "ffnn", "cascade", "linear"), _REQUIRED),
    "dt": (float, 0.004),
    "split_fraction": (float, 0.7),
    "reference": (float, 0.0),
    "out_dir": (str, "run"),
    # plant
    "mass": (float, 1.05),
    "Ix": (float, 0.0095),
    "Iy": (float, 0.0095),
    "Iz": (float, 0.0186),
    "plant_torque_limit": (float, 0.5),
    "thrust_limit": (float, 30.0),
    "motor_tau_s": (float, 0.02),
    "g": (float, 9.81),
    # excitation
    "band_min": (float, 0.1),
    "band_max": (float, 20.0),
    "prbs_amplitude": (float, None),
    "prbs_order": (int, None),
    "prbs_bit_interval_s": (float, None),
    "prbs_seed": (int, 1),
    # noise
    "meas_std": (float, 0.01),
    "dist_std": (float, 0.0),
    # model
    "na": (int, 15),
    "nb": (int, 7),
    "hidden": (int, None),
    "h1": (int, 10),
    "h2": (int, 20),
    # training
    "algorithm": (_choice("lm", "adam"), "lm"),
    "max_epochs": (int, 200),
    "patience": (int, 6),
    "lm_lambda0": (float, 1e-3),
    "lm_lambda_factor": (float, 10.0),
    "learning_rate": (float, 1e-3),
    "gradient_check": (_bool, False),
}
for _k in GAIN_KEYS:
    SCHEMA[_k] = (float, getattr(AxisGains(), _k))
    for _ax in AXES:
        SCHEMA[f"{_ax}.{_k}"] = (float, None)


@dataclass(frozen=True)
class ExperimentFile:
    values: dict
    path: str = "<string>"

    def __getitem__(self, key):
        return self.values[key]

    def digest(self) -> str:
        text = "\n".join(f"{k}={self.values[k]!r}" for k in sorted(self.values))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentFile":
        return replace(self, values={**self.values, **kw})


def parse_config_text(text: str, path: str = "<string>") -> ExperimentFile:
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigurationError(f"{path}:{lineno}: duplicate key {key!r}")
        parser = SCHEMA[key][0]
        try:
            seen[key] = parser(value)
        except ValueError as exc:
            raise ConfigurationError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    values = {}
    missing = []
    for key, (_, default) in SCHEMA.items():
        if key in seen:
            values[key] = seen[key]
        elif default is _REQUIRED:
            missing.append(key)
        else:
            values[key] = default
    if missing:
        raise ConfigurationError(f"{path}: missing required key(s): {', '.join(missing)}")
    return ExperimentFile(values, path)


def load_config(path) -> ExperimentFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def plant_params(cfg: ExperimentFile) -> QuadrotorParams:
    return QuadrotorParams(
        mass=cfg["mass"], Ix=cfg["Ix"], Iy=cfg["Iy"], Iz=cfg["Iz"],
        torque_limits=(cfg["plant_torque_limit"],) * 3, thrust_limit=cfg["thrust_limit"],
        motor_tau_s=cfg["motor_tau_s"], g=cfg["g"],
    )


def cascade_gains(cfg: ExperimentFile) -> CascadeGains:
    per_axis = {}
    for ax in AXES:
        kw = {}
        for k in GAIN_KEYS:
            override = cfg[f"{ax}.{k}"]
            kw[k] = cfg[k] if override is None else override
        per_axis[ax] = AxisGains(**kw)
    return CascadeGains(**per_axis)


def prbs_spec(cfg: ExperimentFile, axis: str) -> PrbsSpec:
    gains = cascade_gains(cfg)[axis]
    amplitude = cfg["prbs_amplitude"]
    if amplitude is None:
        amplitude = 0.1 * gains.torque_limit
    seed = cfg["prbs_seed"]
    if cfg["prbs_order"] is not None or cfg["prbs_bit_interval_s"] is not None:
        if cfg["prbs_order"] is None or cfg["prbs_bit_interval_s"] is None:
            raise ConfigurationError("prbs_order and prbs_bit_interval_s must be given together")
        return PrbsSpec(order=cfg["prbs_order"], bit_interval_s=cfg["prbs_bit_interval_s"],
                        dt=cfg["dt"], amplitude=amplitude, seed=seed)
    return design_prbs_for_band(BandSpec(cfg["band_min"], cfg["band_max"]), cfg["dt"], amplitude, seed=seed)


def experiment_config(cfg: ExperimentFile, axis: str | None = None) -> ExperimentConfig:
    axis = axis or cfg["axis"]
    if axis == "all":
        raise ConfigurationError("axis=all must be expanded per axis")
    return ExperimentConfig(
        axis=axis,
        duration_s=cfg["duration_s"],
        dt=cfg["dt"],
        prbs=prbs_spec(cfg, axis),
        gains=cascade_gains(cfg),
        noise=NoiseSpec(meas_std=cfg["meas_std"], dist_std=cfg["dist_std"], seed=cfg["seed"]),
        plant=plant_params(cfg),
        split_fraction=cfg["split_fraction"],
        reference=cfg["reference"],
    )


def architecture(cfg: ExperimentFile) -> Architecture:
    kind = cfg["arch"]
    if kind == "sigmoid":
        return Architecture.sigmoid_single(cfg["hidden"] or 30)
    if kind == "ffnn":
        return Architecture.feedforward_two(cfg["h1"], cfg["h2"])
    if kind == "cascade":
        return Architecture.cascade_forward(cfg["hidden"] or 20)
    return Architecture.linear()


def delay_config(cfg: ExperimentFile) -> DelayConfig:
    return DelayConfig(cfg["na"], cfg["nb"])


def training_options(cfg: ExperimentFile) -> TrainingOptions:
    return TrainingOptions(
        algorithm=cfg["algorithm"],
        max_epochs=cfg["max_epochs"],
        patience=cfg["patience"],
        lm_lambda0=cfg["lm_lambda0"],
        lm_lambda_factor=cfg["lm_lambda_factor"],
        learning_rate=cfg["learning_rate"],
        seed=cfg["seed"],
        gradient_check=cfg["gradient_check"],
    )
