import numpy as np
import pytest
from scipy.signal import lfilter

from narx_sysid.control import Dataset

ARX_A = (1.5, -0.7)
ARX_B = (1.0, 0.5)


def prbs_like(n, seed=0, hold=3):
    """Seeded random binary input, independent of the package's LFSR."""
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=n // hold + 1) * 2.0 - 1.0
    return np.repeat(bits, hold)[:n]


def arx_response(u, a=ARX_A, b=ARX_B):
    """y(k) = a1 y(k-1) + a2 y(k-2) + b1 u(k-1) + b2 u(k-2), zero initial state."""
    return lfilter(np.r_[0.0, b], np.r_[1.0, -np.asarray(a)], u)


@pytest.fixture
def arx_dataset():
    u = prbs_like(1000, seed=3)
    return Dataset.from_arrays(u, arx_response(u), dt=0.004, split_fraction=0.7)


_ACCEPTANCE = []


def record_criterion(number, ok, detail):
    _ACCEPTANCE.append((number, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
