"""PRBS excitation design and basic signal utilities.

The PRBS is produced by a Fibonacci LFSR.  Its useful band is taken as
``[2*pi/(N*Tb), 2.78/Tb]``: the lower edge is the fundamental of one
period, the upper edge the half-power point of the sinc^2 envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ArgumentError, ConfigurationError, DesignError

# Half-power point of sinc^2(w*Tb/2), in units of 1/Tb.
HALF_POWER_CONSTANT = 2.78

# Maximal-length Fibonacci taps (1-based register positions, XOR feedback).
MAXIMAL_TAPS: dict[int, tuple[int, ...]] = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 11, 10, 4),
    13: (13, 12, 11, 8),
    14: (14, 13, 12, 2),
    15: (15, 14),
    16: (16, 15, 13, 4),
}
MIN_ORDER, MAX_ORDER = 2, 16


def _samples_per(interval: float, dt: float) -> int:
    """Return ``interval/dt`` as an int, or raise if it is not integral."""
    ratio = interval / dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
        raise ConfigurationError(
            f"interval {interval!r} s is not a positive integer multiple of dt={dt!r} s"
        )
    return m


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled scalar time series."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ArgumentError("signal samples must be one-dimensional")
        if not self.dt > 0:
            raise ArgumentError(f"dt must be positive, got {self.dt!r}")
        if not np.all(np.isfinite(samples)):
            raise ArgumentError("signal contains non-finite samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return len(self.samples)

    @property
    def time(self) -> np.ndarray:
        return np.arange(len(self.samples)) * self.dt


@dataclass(frozen=True)
class BandSpec:
    omega_min: float
    omega_max: float

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise ConfigurationError(
                f"band needs 0 < omega_min < omega_max, got [{self.omega_min}, {self.omega_max}]"
            )

    def covers(self, other: "BandSpec") -> bool:
        return self.omega_min <= other.omega_min and self.omega_max >= other.omega_max


@dataclass(frozen=True)
class PrbsSpec:
    """Parameters of a maximal-length PRBS.

    ``seed`` is the initial register as an int whose bit ``i-1`` holds
    register cell ``i``; a string such as ``"1111"`` is read left to right
    as cells ``1..n``.
    """

    order: int
    bit_interval_s: float
    dt: float
    amplitude: float = 1.0
    n_periods: int = 1
    taps: tuple[int, ...] | None = None
    seed: int | str = field(default=1)

    def __post_init__(self):
        if not MIN_ORDER <= self.order <= MAX_ORDER:
            raise ConfigurationError(f"PRBS order must be in [{MIN_ORDER}, {MAX_ORDER}], got {self.order}")
        taps = MAXIMAL_TAPS[self.order] if self.taps is None else tuple(sorted(set(self.taps), reverse=True))
        if self.order not in taps or any(not 1 <= t <= self.order for t in taps):
            raise ConfigurationError(f"taps {taps} must lie in 1..{self.order} and include {self.order}")
        if _lfsr_period(self.order, taps) != 2**self.order - 1:
            raise ConfigurationError(f"taps {taps} are not maximal-length for order {self.order}")
        object.__setattr__(self, "taps", taps)
        seed = _parse_seed(self.seed, self.order)
        object.__setattr__(self, "seed", seed)
        if self.n_periods < 1:
            raise ConfigurationError("n_periods must be >= 1")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        _samples_per(self.bit_interval_s, self.dt)
        if not math.isfinite(self.amplitude):
            raise ConfigurationError("amplitude must be finite")

    @property
    def period_bits(self) -> int:
        return 2**self.order - 1

    @property
    def samples_per_bit(self) -> int:
        return _samples_per(self.bit_interval_s, self.dt)

    @property
    def period_samples(self) -> int:
        return self.period_bits * self.samples_per_bit

    def band(self) -> BandSpec:
        return prbs_covered_band(self.bit_interval_s, self.period_bits)


def _parse_seed(seed, order: int) -> int:
    if isinstance(seed, str):
        if len(seed) != order or set(seed) - {"0", "1"}:
            raise ConfigurationError(f"seed {seed!r} must be a {order}-character bit string")
        value = sum(1 << i for i, ch in enumerate(seed) if ch == "1")
    else:
        value = int(seed)
    if value == 0:
        raise ConfigurationError("LFSR seed must not be all zeros")
    if value < 0 or value >= 1 << order:
        raise ConfigurationError(f"seed {seed!r} does not fit in {order} bits")
    return value


def _lfsr_bits(order: int, taps: tuple[int, ...], seed: int, count: int) -> np.ndarray:
    # register cell i lives in bit i-1; output is cell n, feedback enters cell 1
    mask = 0
    for t in taps:
        mask |= 1 << (t - 1)
    state = seed
    top = order - 1
    full = (1 << order) - 1
    out = np.empty(count, dtype=np.uint8)
    for k in range(count):
        out[k] = (state >> top) & 1
        fb = (state & mask).bit_count() & 1
        state = ((state << 1) | fb) & full
    return out


@lru_cache(maxsize=None)
def _lfsr_period(order: int, taps: tuple[int, ...]) -> int:
    mask = 0
    for t in taps:
        mask |= 1 << (t - 1)
    full = (1 << order) - 1
    start = state = 1
    for k in range(1, 1 << order):
        fb = (state & mask).bit_count() & 1
        state = ((state << 1) | fb) & full
        if state == start:
            return k
    return 0


def prbs_bits(spec: PrbsSpec, count: int | None = None) -> np.ndarray:
    """Raw 0/1 LFSR output bits (one period unless ``count`` is given)."""
    n = spec.period_bits if count is None else count
    return _lfsr_bits(spec.order, spec.taps, spec.seed, n)


def generate_prbs(spec: PrbsSpec) -> Signal:
    """Two-level PRBS in ``{-a, +a}``, each bit held for ``Tb/dt`` samples."""
    bits = prbs_bits(spec)
    levels = np.where(bits == 1, spec.amplitude, -spec.amplitude).astype(float)
    if spec.amplitude == 0:
        levels = np.zeros_like(levels)
    held = np.repeat(levels, spec.samples_per_bit)
    return Signal(np.tile(held, spec.n_periods), spec.dt)


def prbs_covered_band(bit_interval_s: float, n_bits_per_period: int) -> BandSpec:
    if not bit_interval_s > 0 or n_bits_per_period < 1:
        raise ArgumentError("bit interval and period length must be positive")
    return BandSpec(
        2 * math.pi / (n_bits_per_period * bit_interval_s),
        HALF_POWER_CONSTANT / bit_interval_s,
    )


def design_prbs_for_band(band: BandSpec, dt: float, amplitude: float = 1.0, **kwargs) -> PrbsSpec:
    """Pick the slowest admissible bit clock, then the shortest covering register.

    Extra keyword arguments (``seed``, ``n_periods``) are passed to PrbsSpec.
    """
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    m = math.floor(HALF_POWER_CONSTANT / (band.omega_max * dt))
    # settle rounding at the boundary with the same test covers() applies
    while m > 0 and HALF_POWER_CONSTANT / (m * dt) < band.omega_max:
        m -= 1
    while HALF_POWER_CONSTANT / ((m + 1) * dt) >= band.omega_max:
        m += 1
    if m < 1:
        raise DesignError(
            f"omega_max={band.omega_max} rad/s needs Tb < dt={dt} s "
            f"(2.78/dt = {HALF_POWER_CONSTANT / dt:.4g} rad/s)"
        )
    bit_interval = m * dt
    for order in range(MIN_ORDER, MAX_ORDER + 1):
        covered = prbs_covered_band(bit_interval, 2**order - 1)
        if covered.covers(band):
            return PrbsSpec(order=order, bit_interval_s=bit_interval, dt=dt, amplitude=amplitude, **kwargs)
    raise DesignError(
        f"omega_min={band.omega_min} rad/s needs a register longer than {MAX_ORDER} bits at Tb={bit_interval} s"
    )


def autocorrelation(signal: Signal | np.ndarray, max_lag: int, normalize: bool = True) -> np.ndarray:
    """Circular autocorrelation for lags ``0..max_lag`` (in samples).

    The record is treated as one period.  With ``normalize`` the lag-0 value
    is 1; otherwise values are the mean lagged product ``sum(x*x')/N``.
    """
    x = np.asarray(signal.samples if isinstance(signal, Signal) else signal, dtype=float)
    n = len(x)
    if n == 0:
        raise ArgumentError("autocorrelation of an empty signal")
    if not 0 <= max_lag < n:
        raise ArgumentError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    acf = np.array([np.dot(x, np.roll(x, -lag)) for lag in range(max_lag + 1)]) / n
    if not normalize:
        return acf
    if acf[0] == 0:
        raise ArgumentError("autocorrelation of an all-zero signal is undefined")
    return acf / acf[0]
