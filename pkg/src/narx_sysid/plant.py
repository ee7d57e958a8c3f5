"""Rigid-body quadrotor attitude and vertical dynamics.

Torque inputs act directly on the body axes (no per-motor mixing, no rotor
gyroscopic term).  Integration is fixed-step RK4; the hot loop works on
plain float tuples because numpy is slow on 11-element vectors.
"""
from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ConfigurationError, SimulationFault

DEFAULT_DT = 0.004
PITCH_GUARD = math.radians(80.0)
STATE_FIELDS = ("phi", "theta", "psi", "p", "q", "r", "z", "vz", "tau_phi", "tau_theta", "tau_psi")


@dataclass(frozen=True)
class QuadrotorParams:
    mass: float = 1.05
    Ix: float = 0.0095
    Iy: float = 0.0095
    Iz: float = 0.0186
    torque_limits: tuple[float, float, float] = (0.5, 0.5, 0.5)
    thrust_limit: float = 30.0
    motor_tau_s: float = 0.02
    g: float = 9.81

    def __post_init__(self):
        limits = tuple(float(v) for v in np.broadcast_to(self.torque_limits, 3))
        object.__setattr__(self, "torque_limits", limits)
        if not self.mass > 0:
            raise ConfigurationError("mass must be positive")
        if not min(self.Ix, self.Iy, self.Iz) > 0:
            raise ConfigurationError("moments of inertia must be positive")
        if not min(limits) > 0 or not self.thrust_limit > 0:
            raise ConfigurationError("torque and thrust limits must be positive")
        if self.motor_tau_s < 0:
            raise ConfigurationError("motor_tau_s must be >= 0")

    @property
    def hover_thrust(self) -> float:
        return self.mass * self.g


@dataclass(frozen=True)
class PlantState:
    phi: float = 0.0
    theta: float = 0.0
    psi: float = 0.0
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0
    z: float = 0.0
    vz: float = 0.0
    tau_phi: float = 0.0
    tau_theta: float = 0.0
    tau_psi: float = 0.0

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)

    @classmethod
    def from_sequence(cls, values) -> "PlantState":
        return cls(*(float(v) for v in values))

    @property
    def angles(self) -> tuple[float, float, float]:
        return self.phi, self.theta, self.psi

    @property
    def rates(self) -> tuple[float, float, float]:
        return self.p, self.q, self.r


assert tuple(f.name for f in fields(PlantState)) == STATE_FIELDS


@dataclass(frozen=True)
class ControlInput:
    U1: float = 0.0
    U2: float = 0.0
    U3: float = 0.0
    U4: float = 0.0


@dataclass(frozen=True)
class NoiseSpec:
    meas_std: float | tuple[float, float, float, float] = 0.0
    dist_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        meas = tuple(float(v) for v in np.broadcast_to(self.meas_std, 4))
        object.__setattr__(self, "meas_std", meas)
        if min(meas) < 0 or self.dist_std < 0:
            raise ConfigurationError("noise standard deviations must be >= 0")


class NoiseStream:
    """Seeded disturbance and measurement noise, addressable by step index.

    Disturbance and measurement draws come from independent child streams
    filled in fixed-size chunks, so the value at step ``k`` does not depend
    on how the caller interleaves requests.
    """

    _CHUNK = 8192

    def __init__(self, spec: NoiseSpec):
        self.spec = spec
        dist_seq, meas_seq = np.random.SeedSequence(spec.seed).spawn(2)
        self._dist_rng = np.random.default_rng(dist_seq)
        self._meas_rng = np.random.default_rng(meas_seq)
        self._dist = np.empty((0, 3))
        self._meas = np.empty((0, 4))

    def _extend(self, attr: str, rng, width: int, k: int) -> np.ndarray:
        buf = getattr(self, attr)
        while k >= len(buf):
            buf = np.vstack([buf, rng.standard_normal((self._CHUNK, width))])
        setattr(self, attr, buf)
        return buf

    def disturbance(self, k: int) -> tuple[float, float, float]:
        if self.spec.dist_std == 0:
            return (0.0, 0.0, 0.0)
        row = self._extend("_dist", self._dist_rng, 3, k)[k] * self.spec.dist_std
        return tuple(float(v) for v in row)

    def measurement(self, k: int) -> tuple[float, float, float, float]:
        std = self.spec.meas_std
        if not any(std):
            return (0.0, 0.0, 0.0, 0.0)
        row = self._extend("_meas", self._meas_rng, 4, k)[k]
        return tuple(float(v) * s for v, s in zip(row, std))


def _clamp(v: float, lim: float) -> float:
    return -lim if v < -lim else lim if v > lim else v


def _rhs(s, u1, t1, t2, t3, P):
    """State derivative; ``P`` is the tuple from :func:`_pack`."""
    phi, theta, _psi, p, q, r, _z, vz, a1, a2, a3 = s
    mass, Ix, Iy, Iz, tau_m, g = P
    if tau_m > 0:
        da1 = (t1 - a1) / tau_m
        da2 = (t2 - a2) / tau_m
        da3 = (t3 - a3) / tau_m
    else:
        a1, a2, a3 = t1, t2, t3
        da1 = da2 = da3 = 0.0
    sphi, cphi = math.sin(phi), math.cos(phi)
    cth = math.cos(theta)
    tth = math.tan(theta)
    return (
        p + sphi * tth * q + cphi * tth * r,
        cphi * q - sphi * r,
        (sphi * q + cphi * r) / cth,
        (Iy - Iz) / Ix * q * r + a1 / Ix,
        (Iz - Ix) / Iy * p * r + a2 / Iy,
        (Ix - Iy) / Iz * p * q + a3 / Iz,
        vz,
        # written as (c*U1 - m*g)/m so that U1 = m*g gives an exact zero
        (cphi * cth * u1 - mass * g) / mass,
        da1,
        da2,
        da3,
    )


def _pack(params: QuadrotorParams):
    return (params.mass, params.Ix, params.Iy, params.Iz, params.motor_tau_s, params.g)


def _check(s, k=None):
    where = "" if k is None else f" at step {k}"
    for v in s:
        if not math.isfinite(v):
            raise SimulationFault(f"non-finite plant state{where}: {s}")
    if abs(s[1]) >= PITCH_GUARD:
        raise SimulationFault(
            f"pitch {math.degrees(s[1]):.2f} deg exceeds the 80 deg Euler singularity guard{where}"
        )


def _rk4(s, u1, t1, t2, t3, P, dt):
    k1 = _rhs(s, u1, t1, t2, t3, P)
    h = 0.5 * dt
    s2 = tuple(a + h * b for a, b in zip(s, k1))
    k2 = _rhs(s2, u1, t1, t2, t3, P)
    s3 = tuple(a + h * b for a, b in zip(s, k2))
    k3 = _rhs(s3, u1, t1, t2, t3, P)
    s4 = tuple(a + dt * b for a, b in zip(s, k3))
    k4 = _rhs(s4, u1, t1, t2, t3, P)
    c = dt / 6.0
    out = tuple(a + c * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(s, k1, k2, k3, k4))
    if P[4] <= 0:
        # no actuator lag: the stored torque is the applied torque
        out = out[:8] + (t1, t2, t3)
    return out


def _saturate(inp, params: QuadrotorParams):
    lim = params.torque_limits
    return (
        min(max(inp[0], 0.0), params.thrust_limit),
        _clamp(inp[1], lim[0]),
        _clamp(inp[2], lim[1]),
        _clamp(inp[3], lim[2]),
    )


def derivatives(state: PlantState, inp: ControlInput, params: QuadrotorParams) -> PlantState:
    """Time derivative of ``state`` (returned in the PlantState layout).

    Inputs are saturated to the parameter limits first.
    """
    s = state.as_tuple()
    _check(s)
    u1, t1, t2, t3 = _saturate((inp.U1, inp.U2, inp.U3, inp.U4), params)
    return PlantState(*_rhs(s, u1, t1, t2, t3, _pack(params)))


def step_raw(s: tuple, inp: tuple, params: QuadrotorParams, dt: float,
             noise: NoiseStream | None = None, k: int = 0, packed=None) -> tuple:
    """Tuple-level :func:`step`, used by the closed-loop driver."""
    u1, t1, t2, t3 = _saturate(inp, params)
    if noise is not None:
        d1, d2, d3 = noise.disturbance(k)
        t1, t2, t3 = t1 + d1, t2 + d2, t3 + d3
    out = _rk4(s, u1, t1, t2, t3, packed or _pack(params), dt)
    _check(out, k)
    return out


def step(state: PlantState, inp: ControlInput, params: QuadrotorParams, dt: float = DEFAULT_DT,
         noise: NoiseStream | None = None, k: int = 0) -> PlantState:
    """Advance one RK4 step; the disturbance for step ``k`` is added to U2..U4."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    s = state.as_tuple()
    _check(s, k)
    return PlantState(*step_raw(s, (inp.U1, inp.U2, inp.U3, inp.U4), params, dt, noise, k))


def measure(state: PlantState, noise: NoiseStream | None = None, k: int = 0) -> tuple[float, float, float, float]:
    """Measured ``(p, q, r, z)`` with additive Gaussian noise for sample ``k``."""
    n = noise.measurement(k) if noise is not None else (0.0, 0.0, 0.0, 0.0)
    return (state.p + n[0], state.q + n[1], state.r + n[2], state.z + n[3])


def simulate(state: PlantState, inputs, params: QuadrotorParams, dt: float = DEFAULT_DT,
             noise: NoiseStream | None = None, n_steps: int | None = None, record: bool = True):
    """Open-loop simulation.

    ``inputs`` is an ``(N, 4)`` array of ``(U1, U2, U3, U4)`` rows, or a single
    row held for ``n_steps``.  Returns the ``(N+1, 11)`` trajectory, or only
    the final PlantState when ``record`` is False.
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        if n_steps is None:
            raise ConfigurationError("n_steps is required for a constant input")
        rows = None
        const = tuple(float(v) for v in inputs)
    else:
        n_steps = len(inputs)
        rows = [tuple(r) for r in inputs.tolist()]
    P = _pack(params)
    s = state.as_tuple()
    _check(s)
    traj = [s] if record else None
    for k in range(n_steps):
        s = step_raw(s, const if rows is None else rows[k], params, dt, noise, k, P)
        if record:
            traj.append(s)
    return np.array(traj) if record else PlantState(*s)
