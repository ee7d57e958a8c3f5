import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from narx_sysid.errors import ConfigurationError, SimulationFault
from narx_sysid.plant import (
    ControlInput,
    NoiseSpec,
    NoiseStream,
    PlantState,
    QuadrotorParams,
    derivatives,
    measure,
    simulate,
    step,
)

HOVER = QuadrotorParams()


def step_error_ratio(params, s0, u, h):
    """Error of one step of h and two of h/2 against a 100-substep reference."""
    ref = np.array(simulate(s0, u, params, dt=h / 100, n_steps=100, record=False).as_tuple())
    one = np.array(simulate(s0, u, params, dt=h, n_steps=1, record=False).as_tuple())
    two = np.array(simulate(s0, u, params, dt=h / 2, n_steps=2, record=False).as_tuple())
    return np.abs(one - ref).max() / np.abs(two - ref).max()


def test_hover_derivatives_vanish():
    d = derivatives(PlantState(), ControlInput(U1=HOVER.hover_thrust), HOVER)
    assert all(v == 0.0 for v in d.as_tuple())


def test_single_rate_decouples():
    d = derivatives(PlantState(p=1.0), ControlInput(U1=HOVER.hover_thrust), HOVER)
    assert (d.p, d.q, d.r) == (0.0, 0.0, 0.0)
    assert d.phi == 1.0


def test_torque_over_inertia():
    params = QuadrotorParams(Ix=0.01, motor_tau_s=0.0)
    d = derivatives(PlantState(), ControlInput(U1=params.hover_thrust, U2=0.01), params)
    assert d.p == pytest.approx(1.0, rel=1e-15)


def test_zero_input_fixed_point():
    # no thrust means free fall, so compare the rotational part only
    s = step(PlantState(), ControlInput(), HOVER)
    assert s.as_tuple()[:6] == (0.0,) * 6


def test_one_step_rate_example():
    params = QuadrotorParams(Ix=0.01, motor_tau_s=0.0)
    s = step(PlantState(), ControlInput(U1=params.hover_thrust, U2=0.01), params, dt=0.004)
    assert f"{s.p:.7g}" == "0.004"
    assert s.p == pytest.approx(0.004, rel=1e-12)


def test_hover_short_run_holds():
    final = simulate(PlantState(), [HOVER.hover_thrust, 0, 0, 0], HOVER, n_steps=10_000, record=False)
    assert max(abs(v) for v in final.as_tuple()) < 1e-12


@pytest.mark.parametrize("h, lo, hi", [(0.004, 14.0, 20.0), (0.002, 14.5, 18.0)])
def test_rk4_step_halving(h, lo, hi):
    s0 = PlantState(phi=0.2, theta=-0.1, p=2.0, q=-1.5, r=1.0, tau_phi=0.05)
    ratio = step_error_ratio(HOVER, s0, [HOVER.hover_thrust, 0.1, -0.05, 0.02], h)
    assert lo < ratio < hi


def test_rk4_step_halving_without_lag():
    params = QuadrotorParams(motor_tau_s=0.0)
    s0 = PlantState(phi=0.3, theta=0.2, p=1.0, q=0.5, r=-2.0)
    ratio = step_error_ratio(params, s0, [params.hover_thrust, 0.05, 0.02, -0.03], 0.01)
    assert 14.0 < ratio < 20.0


def test_roll_pitch_symmetry():
    rng = np.random.default_rng(3)
    torque = rng.uniform(-0.3, 0.3, 800)
    zeros = np.zeros_like(torque)
    thrust = np.full_like(torque, HOVER.hover_thrust)
    roll = simulate(PlantState(), np.column_stack([thrust, torque, zeros, zeros]), HOVER)
    pitch = simulate(PlantState(), np.column_stack([thrust, zeros, torque, zeros]), HOVER)
    np.testing.assert_allclose(roll[:, 3], pitch[:, 4], rtol=0, atol=1e-12)
    np.testing.assert_allclose(roll[:, 0], pitch[:, 1], rtol=0, atol=1e-12)


def test_determinism_with_noise():
    spec = NoiseSpec(meas_std=0.01, dist_std=0.002, seed=11)
    u = np.tile([HOVER.hover_thrust, 0.01, 0.0, 0.0], (500, 1))
    a = simulate(PlantState(), u, HOVER, noise=NoiseStream(spec))
    b = simulate(PlantState(), u, HOVER, noise=NoiseStream(spec))
    assert a.tobytes() == b.tobytes()


def test_noise_index_addressable():
    spec = NoiseSpec(meas_std=0.01, seed=5)
    forward = NoiseStream(spec)
    seq = [forward.measurement(k) for k in range(20_000)]
    backward = NoiseStream(spec)
    assert backward.measurement(19_999) == seq[-1]
    assert backward.measurement(3) == seq[3]


def test_noiseless_measurement_exact():
    s = PlantState(p=0.125, q=-0.5, r=2.0, z=1.5)
    assert measure(s, NoiseStream(NoiseSpec())) == (0.125, -0.5, 2.0, 1.5)
    assert measure(s) == (0.125, -0.5, 2.0, 1.5)


def test_measurement_noise_mean():
    n = 100_000
    stream = NoiseStream(NoiseSpec(meas_std=0.01, seed=2))
    draws = np.array([measure(PlantState(), stream, k)[0] for k in range(n)])
    assert abs(draws.mean()) < 3 * 0.01 / math.sqrt(n)
    assert draws.std() == pytest.approx(0.01, rel=0.02)


def test_pitch_guard_faults():
    with pytest.raises(SimulationFault):
        step(PlantState(theta=math.radians(85)), ControlInput(U1=HOVER.hover_thrust), HOVER)


def test_nonpositive_dt_rejected():
    with pytest.raises(ConfigurationError):
        step(PlantState(), ControlInput(), HOVER, dt=0.0)


@pytest.mark.parametrize("kwargs", [dict(mass=0.0), dict(Ix=-1.0), dict(motor_tau_s=-0.1), dict(torque_limits=0.0)])
def test_invalid_params(kwargs):
    with pytest.raises(ConfigurationError):
        QuadrotorParams(**kwargs)


def test_inputs_are_saturated():
    params = QuadrotorParams(motor_tau_s=0.0)
    big = derivatives(PlantState(), ControlInput(U1=params.hover_thrust, U2=5.0), params)
    limit = derivatives(PlantState(), ControlInput(U1=params.hover_thrust, U2=0.5), params)
    assert big.p == limit.p


@settings(max_examples=40, deadline=None)
@given(
    p=st.floats(-3, 3), q=st.floats(-3, 3), r=st.floats(-3, 3),
    phi=st.floats(-1, 1), theta=st.floats(-1, 1),
)
def test_rotational_energy_conserved_torque_free(p, q, r, phi, theta):
    # torque-free rigid body: kinetic energy is invariant, RK4 keeps it to O(dt^5) per step
    params = QuadrotorParams(motor_tau_s=0.0)
    s = simulate(PlantState(phi=phi, theta=theta, p=p, q=q, r=r), [params.hover_thrust, 0, 0, 0],
                 params, n_steps=50, record=False)

    def energy(a, b, c):
        return params.Ix * a * a + params.Iy * b * b + params.Iz * c * c

    e0 = energy(p, q, r)
    assert energy(s.p, s.q, s.r) == pytest.approx(e0, rel=1e-6, abs=1e-12)
