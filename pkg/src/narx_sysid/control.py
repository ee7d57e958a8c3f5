"""Cascade attitude stabilization and closed-loop PRBS experiments.

Loop per axis: an outer P controller maps angle error to a rate command,
an inner PI controller maps rate error to torque.  On the excited axis the
PRBS is added to the inner controller output; that sum is the recorded
input ``u`` and the measured body rate is the recorded output ``y``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ExperimentError, SimulationFault
from .plant import (
    DEFAULT_DT,
    NoiseSpec,
    NoiseStream,
    PlantState,
    QuadrotorParams,
    _pack,
    step_raw,
)
from .signals import BandSpec, PrbsSpec, Signal, design_prbs_for_band, generate_prbs

log = logging.getLogger(__name__)

AXES = ("roll", "pitch", "yaw")
DRY_RUN_ANGLE_LIMIT = math.radians(45.0)
RUN_ANGLE_LIMIT = math.radians(80.0)


@dataclass(frozen=True)
class AxisGains:
    kp_angle: float = 4.0
    kp_rate: float = 0.10
    ki_rate: float = 0.05
    rate_cmd_limit: float = 5.0
    torque_limit: float = 0.5
    integral_limit: float = 0.25

    def __post_init__(self):
        if min(self.kp_angle, self.kp_rate, self.ki_rate) < 0:
            raise ConfigurationError("controller gains must be >= 0")
        if not min(self.rate_cmd_limit, self.torque_limit, self.integral_limit) > 0:
            raise ConfigurationError("controller limits must be positive")


@dataclass(frozen=True)
class CascadeGains:
    roll: AxisGains = field(default_factory=AxisGains)
    pitch: AxisGains = field(default_factory=AxisGains)
    yaw: AxisGains = field(default_factory=AxisGains)

    def __getitem__(self, axis: int | str) -> AxisGains:
        return getattr(self, AXES[axis] if isinstance(axis, int) else axis)


def angle_controller_step(angle_cmd: float, angle_meas: float, gains: AxisGains) -> float:
    """Outer loop: proportional angle law, clamped to the rate-command limit."""
    cmd = gains.kp_angle * (angle_cmd - angle_meas)
    lim = gains.rate_cmd_limit
    return min(max(cmd, -lim), lim)


class RateController:
    """Inner-loop PI with a clamped integrator.

    The integrator is frozen on any step where the unclamped output would
    exceed the torque limit.
    """

    def __init__(self, gains: AxisGains):
        self.gains = gains
        self.integral = 0.0

    def reset(self):
        self.integral = 0.0

    def step(self, rate_cmd: float, rate_meas: float, dt: float) -> float:
        g = self.gains
        err = rate_cmd - rate_meas
        integral = self.integral + g.ki_rate * err * dt
        integral = min(max(integral, -g.integral_limit), g.integral_limit)
        out = g.kp_rate * err + integral
        if abs(out) > g.torque_limit:
            out = g.kp_rate * err + self.integral
        else:
            self.integral = integral
        return min(max(out, -g.torque_limit), g.torque_limit)


def rate_controller_step(controller: RateController, rate_cmd: float, rate_meas: float, dt: float) -> float:
    return controller.step(rate_cmd, rate_meas, dt)


def default_prbs(dt: float = DEFAULT_DT, torque_limit: float = 0.5, seed: int | str = 1) -> PrbsSpec:
    """PRBS covering 0.1..20 rad/s at 10% of the rate-controller saturation."""
    return design_prbs_for_band(BandSpec(0.1, 20.0), dt, amplitude=0.1 * torque_limit, seed=seed)


@dataclass(frozen=True)
class ExperimentConfig:
    axis: str = "roll"
    duration_s: float = 123.0
    dt: float = DEFAULT_DT
    prbs: PrbsSpec | None = None
    gains: CascadeGains = field(default_factory=CascadeGains)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    plant: QuadrotorParams = field(default_factory=QuadrotorParams)
    split_fraction: float = 0.7
    reference: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigurationError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not 0 < self.split_fraction < 1:
            raise ConfigurationError("split_fraction must lie in (0, 1)")
        if self.prbs is None:
            object.__setattr__(self, "prbs", default_prbs(self.dt, self.gains[self.axis].torque_limit))
        if abs(self.prbs.dt - self.dt) > 1e-12 * self.dt:
            raise ConfigurationError("PRBS dt differs from experiment dt")
        if self.n_samples < self.prbs.period_samples:
            raise ConfigurationError(
                f"duration {self.duration_s} s is shorter than one PRBS period "
                f"({self.prbs.period_samples * self.dt:.6g} s)"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s / self.dt))

    @property
    def axis_index(self) -> int:
        return AXES.index(self.axis)


@dataclass(frozen=True)
class Dataset:
    """Aligned input/output record of one axis, with a contiguous split."""

    u: Signal
    y: Signal
    axis: str
    split_index: int
    seed: int = 0

    def __post_init__(self):
        if len(self.u) != len(self.y) or len(self.u) < 2:
            raise ConfigurationError("u and y must have equal length >= 2")
        if self.u.dt != self.y.dt:
            raise ConfigurationError("u and y sample periods differ")
        if not 0 < self.split_index < len(self.u):
            raise ConfigurationError(f"split index {self.split_index} is not inside (0, {len(self.u)})")

    @property
    def dt(self) -> float:
        return self.u.dt

    def __len__(self):
        return len(self.u)

    @classmethod
    def from_arrays(cls, u, y, dt: float, axis: str = "roll", split_fraction: float = 0.7,
                    split_index: int | None = None, seed: int = 0) -> "Dataset":
        u = np.asarray(u, dtype=float)
        if split_index is None:
            split_index = int(round(split_fraction * len(u)))
        return cls(Signal(u, dt), Signal(np.asarray(y, dtype=float), dt), axis, split_index, seed)


def _reference_for(cfg: ExperimentConfig) -> tuple[float, float, float]:
    ref = np.broadcast_to(np.asarray(cfg.reference, dtype=float), 3) if np.ndim(cfg.reference) else None
    if ref is not None:
        return tuple(float(v) for v in ref)
    out = [0.0, 0.0, 0.0]
    out[cfg.axis_index] = float(cfg.reference)
    return tuple(out)


def _closed_loop(cfg: ExperimentConfig, excitation: np.ndarray, noise: NoiseStream | None,
                 angle_limit: float):
    """Run the cascade loop.

    Returns ``(u, y, c2_out, max_abs_angle)`` where ``c2_out`` is the inner
    controller output on the excited axis before the PRBS is added.
    """
    params = cfg.plant
    packed = _pack(params)
    dt = cfg.dt
    ax = cfg.axis_index
    ref = _reference_for(cfg)
    gains = [cfg.gains[j] for j in range(3)]
    inner = [RateController(g) for g in gains]
    n = len(excitation)
    u = np.empty(n)
    y = np.empty(n)
    c2_out = np.empty(n)
    s = PlantState().as_tuple()
    meas = noise.measurement(0) if noise is not None else (0.0,) * 4
    rates = (s[3] + meas[0], s[4] + meas[1], s[5] + meas[2])
    hover = params.hover_thrust
    max_angle = 0.0
    for k in range(n):
        torques = [
            inner[j].step(angle_controller_step(ref[j], s[j], gains[j]), rates[j], dt)
            for j in range(3)
        ]
        c2_out[k] = torques[ax]
        u_k = torques[ax] + excitation[k]
        torques[ax] = u_k
        tilt = math.cos(s[0]) * math.cos(s[1])
        thrust = hover / tilt if tilt > 0.1 else hover
        try:
            s = step_raw(s, (thrust, torques[0], torques[1], torques[2]), params, dt, noise, k, packed)
        except SimulationFault as exc:
            raise ExperimentError(f"closed loop went unstable at sample {k}: {exc}", sample=k) from exc
        big = max(abs(s[0]), abs(s[1]))
        if big >= angle_limit or not math.isfinite(big):
            raise ExperimentError(
                f"closed loop went unstable at sample {k}: |angle| = {math.degrees(big):.2f} deg "
                f">= {math.degrees(angle_limit):.0f} deg",
                sample=k,
            )
        max_angle = max(max_angle, big, abs(s[2]))
        if noise is not None:
            meas = noise.measurement(k + 1)
            rates = (s[3] + meas[0], s[4] + meas[1], s[5] + meas[2])
        else:
            rates = (s[3], s[4], s[5])
        u[k] = u_k
        y[k] = rates[ax]
    return u, y, c2_out, max_angle


def excitation_samples(cfg: ExperimentConfig) -> np.ndarray:
    """PRBS samples for the whole run, repeating the period as needed."""
    return np.resize(generate_prbs(cfg.prbs).samples, cfg.n_samples)


def run_experiment(cfg: ExperimentConfig) -> Dataset:
    """Closed-loop identification run on one axis.

    A noiseless dry run first checks that every angle stays below 45 deg.
    The returned record pairs ``u(k)`` with the rate measured after the
    plant has been stepped with it.
    """
    excitation = excitation_samples(cfg)
    _, _, _, max_angle = _closed_loop(cfg, excitation, None, DRY_RUN_ANGLE_LIMIT)
    log.info("dry run ok: max |angle| %.3f deg", math.degrees(max_angle))
    u, y, _, _ = _closed_loop(cfg, excitation, NoiseStream(cfg.noise), RUN_ANGLE_LIMIT)
    split = int(round(cfg.split_fraction * len(u)))
    return Dataset(Signal(u, cfg.dt), Signal(y, cfg.dt), cfg.axis, split, cfg.noise.seed)
