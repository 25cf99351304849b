import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import MU_B, cumsum_branches
from qgem import interferometer as sg
from qgem.errors import InfeasibleError
from qgem.physcore import Quantity


def _ref_spec(pair=(0, -1), gradient=1e4, mass=2e-15):
    return sg.SplittingSpec(*pair, gradient, mass)


def test_branch_acceleration_sign_and_size():
    a_l, a_r = sg.branch_acceleration(_ref_spec((1, -1)))
    k = 2.003 * MU_B * 1e4 / 2e-15
    assert a_l == pytest.approx(-k, rel=1e-15)
    assert a_r == pytest.approx(k, rel=1e-15)
    assert sg.branch_acceleration(_ref_spec((0, -1)))[0] == 0.0


def test_reference_separation_is_about_five_picometres():
    traj = sg.simulate_branches(_ref_spec(), sg.free_flight_sequence("0.25 ms"))
    da = 2.003 * MU_B * 1e4 / 2e-15
    assert sg.max_separation(traj) == pytest.approx(da * 0.25e-3 ** 2, rel=1e-12)
    assert sg.max_separation(traj) == pytest.approx(5.80495e-12, rel=1e-5)
    assert sg.integrated_separation(traj) == pytest.approx(2 * da * 0.25e-3 ** 3, rel=1e-12)


def test_pm1_pair_doubles_separation():
    a = sg.simulate_branches(_ref_spec((0, -1)), sg.free_flight_sequence(2.5e-4))
    b = sg.simulate_branches(_ref_spec((1, -1)), sg.free_flight_sequence(2.5e-4))
    assert sg.max_separation(b) == pytest.approx(2 * sg.max_separation(a), rel=1e-12)


@pytest.mark.parametrize("pair", [(0, -1), (1, -1), (1, 0), (-1, 1)])
def test_matches_cumsum_integrator(pair):
    spec = _ref_spec(pair)
    t1 = 2.5e-4
    traj = sg.simulate_branches(spec, sg.free_flight_sequence(t1), n_samples=401)
    t, x, v = cumsum_branches(*sg.branch_acceleration(spec), t1, 400)
    np.testing.assert_allclose(traj.x_left, x[0], rtol=0, atol=1e-12 * sg.max_separation(traj))
    np.testing.assert_allclose(traj.x_right, x[1], rtol=0, atol=1e-12 * sg.max_separation(traj))


def test_verlet_hook_matches_closed_form():
    spec = _ref_spec()
    seq = sg.free_flight_sequence(2.5e-4)
    exact = sg.simulate_branches(spec, seq)
    num = sg.simulate_branches(spec, seq, n_samples=4000,
                               integrator=lambda s, q, n: sg.integrate_branches(s, q, n))
    assert sg.max_separation(num) == pytest.approx(sg.max_separation(exact), rel=1e-9)
    assert abs(num.closure_position) < 1e-9 * sg.max_separation(exact)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(1e-2, 1e7), st.sampled_from([(0, -1), (1, -1), (1, 0)]))
def test_closure_property(t1, gradient, pair):
    spec = _ref_spec(pair, gradient)
    traj = sg.simulate_branches(spec, sg.free_flight_sequence(t1))
    da = abs(np.subtract(*sg.branch_acceleration(spec)))
    assert abs(traj.closure_position) <= 1e-12 * da * t1 * t1
    assert abs(traj.closure_velocity) <= 1e-12 * da * t1


@pytest.mark.parametrize("t1", [0.0, -1.0])
def test_degenerate_sequence(t1):
    with pytest.raises(ValueError):
        sg.free_flight_sequence(t1)


def test_zero_gradient_has_no_fringe():
    traj = sg.simulate_branches(_ref_spec(gradient=0.0), sg.free_flight_sequence(1e-3))
    assert sg.max_separation(traj) == 0.0
    with pytest.raises(InfeasibleError):
        sg.fringe_tilt(traj, 2e-15)


def test_fringe_tilt_for_reference_point():
    traj = sg.simulate_branches(_ref_spec(), sg.free_flight_sequence(2.5e-4))
    rep = sg.fringe_report(traj, 2e-15)
    assert rep["fringe_tilt"] == pytest.approx(1.164e-5, rel=1e-3)
    assert rep["reference_fringe_tilt"] == 3.5e-3
    assert rep["note"].startswith("unreconciled parameters")
    # one fringe at the derived tilt
    assert sg.tilt_phase(traj, rep["fringe_tilt"], 2e-15) == pytest.approx(2 * math.pi, rel=1e-9)


def test_tilt_phase_linear_in_sin_theta():
    traj = sg.simulate_branches(_ref_spec(), sg.free_flight_sequence(2.5e-4))
    p1 = sg.tilt_phase(traj, 1e-4, 2e-15)
    p2 = sg.tilt_phase(traj, 2e-4, 2e-15)
    assert p2 / p1 == pytest.approx(math.sin(2e-4) / math.sin(1e-4), rel=1e-12)


def test_surface_spin_count():
    assert sg.surface_spin_count(1e-6, 0.01) == pytest.approx(math.pi * 1e4, rel=1e-12)
    assert sg.surface_spin_count("1 um", Quantity(1e16, (-2, 0, 0, 0, 0, 0, 0))) == \
        pytest.approx(math.pi * 1e4)
    with pytest.raises(ValueError):
        sg.surface_spin_count(0.0, 0.01)


def test_boltzmann_polarization():
    assert sg.boltzmann_polarization("10 T", "1 K") >= 0.9999
    assert sg.boltzmann_polarization(0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        sg.boltzmann_polarization(1.0, 0.0)


def test_contrast():
    assert sg.interference_contrast(0.0, 0.0, 1e-9, 1e-6) == 1.0
    assert sg.interference_contrast(1e-9, 0.0, 1e-9, 1e-6) == pytest.approx(math.exp(-1 / 8))


def test_trajectory_csv_round_trip():
    traj = sg.simulate_branches(_ref_spec(), sg.free_flight_sequence(2.5e-4), n_samples=21)
    buf = io.StringIO()
    sg.write_trajectory_csv(traj, buf)
    assert "\r\n" in buf.getvalue()
    back = sg.read_trajectory_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back["x_right"], traj.x_right)
    assert np.array_equal(back["t"], traj.t)


@pytest.mark.parametrize("bad", [(0, 0), (2, -1)])
def test_bad_spin_pair(bad):
    with pytest.raises(ValueError):
        sg.SplittingSpec(*bad, 1e4, 1e-15)
