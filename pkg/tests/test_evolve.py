import math

import numpy as np
import pytest

from statedrive.driving import (
    HamiltonianSchedule,
    ResourceBudget,
    brachistochrone_hamiltonian,
    brachistochrone_time,
    trajectory_schedule,
)
from statedrive.errors import IntegratorFailureError, ShapeError
from statedrive.evolve import default_dt, propagate_density, propagate_state, trace_distance
from statedrive.gauge import gauge_fix
from statedrive.scenarios import LZScenario, lz_ground, lz_build, random_smooth_trajectory, rotating_qubit
from statedrive.driving import mixed_schedule
from statedrive.state import basis_state, fidelity

from conftest import random_state


@pytest.fixture(scope="module")
def random_drive():
    g = gauge_fix(random_smooth_trajectory(3, np.random.default_rng(3)), n_samples=256)
    return g, trajectory_schedule(g)


def test_zero_hamiltonian_keeps_state(rng):
    psi = random_state(rng, 4)
    sched = HamiltonianSchedule(lambda t: np.zeros((4, 4)), (0, 1))
    res = propagate_state(sched, psi, 0, 1, 0.1, target=lambda t: psi)
    assert np.array_equal(res.final_state, psi)
    assert np.all(res.fidelity_vs_target == pytest.approx(1.0, abs=1e-15))


def test_qubit_arrival_time(rng):
    psi_i, psi_f = random_state(rng, 2), random_state(rng, 2)
    budget = ResourceBudget(1.5)
    h = brachistochrone_hamiltonian(psi_i, psi_f, budget)
    t_arr = brachistochrone_time(psi_i, psi_f, budget)
    dt = 1e-3
    res = propagate_state(HamiltonianSchedule(lambda t: h, (0, 2), constant=True), psi_i, 0, 2 * t_arr, dt)
    fids = np.array([fidelity(s, psi_f) for s in res.states])
    t_best = res.times[int(np.argmax(fids))]
    assert abs(t_best - t_arr) < 2 * dt
    assert fids.max() == pytest.approx(1.0, abs=1e-6)


def test_lz_schedule_reaches_final_ground_state():
    b = lz_build(LZScenario(1.0, 50.0, 1.0))
    t0, t1 = b.schedule.domain
    res = propagate_state(b.schedule, lz_ground(-50.0, 1.0), t0, t1, 1e-5, keep_states=False, checkpoint_every=10**6)
    assert fidelity(res.final_state, lz_ground(50.0, 1.0)) >= 1 - 1e-6


def test_step_count_lands_on_endpoint(random_drive):
    g, sched = random_drive
    res = propagate_state(sched, g(0.0), 0.0, 1.0, 0.3)
    assert res.times[-1] == 1.0 and len(res.times) == 5
    assert res.dt == pytest.approx(0.25)


def test_midpoint_rule_is_second_order(random_drive):
    g, sched = random_drive
    deficits = []
    for dt in (0.04, 0.02, 0.01):
        res = propagate_state(sched, g(0.0), 0.0, 1.0, dt, target=g)
        deficits.append(1.0 - res.worst_fidelity)
    assert deficits[0] / deficits[1] >= 3.5
    assert deficits[1] / deficits[2] >= 3.5


def test_norm_drift_is_tiny(random_drive):
    g, sched = random_drive
    res = propagate_state(sched, g(0.0), 0.0, 1.0, 1e-3)
    assert res.norm_drift[0] == 0.0
    assert np.max(res.norm_drift) < 1e-12


def test_norm_failure_reports_smaller_step(random_drive):
    g, sched = random_drive
    with pytest.raises(IntegratorFailureError) as info:
        propagate_state(sched, g(0.0), 0.0, 1.0, 1e-3, norm_tol=0.0)
    assert info.value.suggested_dt == pytest.approx(5e-4)


def test_shape_mismatch():
    sched = HamiltonianSchedule(lambda t: np.eye(3), (0, 1))
    with pytest.raises(ShapeError):
        propagate_state(sched, basis_state(2, 0), 0, 1, 0.1)


def test_default_step():
    assert default_dt(2.0) == pytest.approx(5e-5)
    assert default_dt(2.0, hbar=3.0) == pytest.approx(1.5e-4)


def test_csv_output(tmp_path, random_drive):
    g, sched = random_drive
    res = propagate_state(sched, g(0.0), 0.0, 1.0, 0.1, target=g)
    res.to_csv(tmp_path / "f.csv")
    data = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert data.shape == (11, 3)
    assert np.array_equal(data[:, 1], res.fidelity_vs_target)


# ------------------------------------------------------------ densities


def test_zero_hamiltonian_keeps_density(rng):
    psi = random_state(rng, 3)
    rho = 0.6 * np.outer(psi, psi.conj()) + 0.4 * np.eye(3) / 3
    sched = HamiltonianSchedule(lambda t: np.zeros((3, 3)), (0, 1))
    res = propagate_density(sched, rho, 0, 1, 0.1, target=lambda t: rho)
    assert np.max(np.abs(res.final_state - rho)) < 1e-15
    assert res.worst_trace_distance < 1e-15


def test_rotating_qubit_density_tracks_closed_form():
    d = rotating_qubit((0.7, 0.3), speed=1.0)
    res = propagate_density(mixed_schedule(d), d.rho(0), *d.domain, 1e-3, target=d.rho, checkpoint_every=25)
    assert res.worst_trace_distance <= 1e-6
    assert np.max(res.spectrum_drift) < 1e-8


def test_pure_density_stays_pure(random_drive):
    g, sched = random_drive
    psi = g(0.0)
    res = propagate_density(sched, np.outer(psi, psi.conj()), 0.0, 1.0, 1e-3, checkpoint_every=50)
    assert np.max(np.abs(res.purity - 1.0)) < 1e-8
    # pure and density propagation agree
    ps = propagate_state(sched, psi, 0.0, 1.0, 1e-3, keep_states=False)
    rho_f = np.outer(ps.final_state, ps.final_state.conj())
    assert trace_distance(rho_f, res.final_state) < 1e-10


def test_density_input_validation():
    sched = HamiltonianSchedule(lambda t: np.zeros((2, 2)), (0, 1))
    for bad in (np.diag([0.6, 0.6]), np.diag([1.5, -0.5]), np.array([[0.5, 0.3], [0.0, 0.5]])):
        with pytest.raises(ValueError):
            propagate_density(sched, bad, 0, 1, 0.1)


def test_density_failure_path(random_drive):
    g, sched = random_drive
    psi = g(0.0)
    with pytest.raises(IntegratorFailureError):
        propagate_density(sched, np.outer(psi, psi.conj()), 0.0, 1.0, 1e-2, tol=0.0)
