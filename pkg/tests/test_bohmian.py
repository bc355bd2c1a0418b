import json
import math

import numpy as np
import pytest

from statedrive.bohmian import (
    continuity_residual,
    free_packet,
    local_potential,
    locality_verdict,
    oscillator_ground,
    polar_decompose,
    traveling_packet,
    traveling_packet_potential,
)
from statedrive.driving import HamiltonianSchedule
from statedrive.errors import NodeError, ShapeError
from statedrive.evolve import propagate_state


def lattice(n_z=801, n_t=201, z=(-8.0, 10.0), t_max=2.0):
    return np.linspace(*z, n_z), np.linspace(0.0, t_max, n_t)


def test_real_packet_has_zero_phase():
    z, t = lattice(201, 5)
    psi = np.broadcast_to(np.exp(-z * z / 2), (t.size, z.size))
    f = polar_decompose(psi, z, t)
    assert np.all(f.S[f.mask] == 0.0)


def test_plane_wave_phase_is_unwrapped():
    z, t = lattice(2001, 3, z=(-10, 10))
    k, hbar = 3.7, 0.8
    psi = np.exp(-z * z / 20)[None, :] * np.exp(1j * k * z)[None, :] * np.ones((t.size, 1))
    f = polar_decompose(psi, z, t, hbar=hbar)
    s = f.S[f.mask]
    zz = np.broadcast_to(z, psi.shape)[f.mask]
    assert np.max(np.abs(s - hbar * k * zz)) < 1e-9


def test_traveling_packet_phase_and_reconstruction():
    z, t = lattice(801, 41)
    m, w, hbar = 1.3, 0.7, 1.1
    psi = traveling_packet(z, t, m, w, hbar=hbar)
    f = polar_decompose(psi, z, t, hbar=hbar)
    exact = math.sqrt(m * hbar * w) * z[None, :] - 0.5 * hbar * w * t[:, None]
    assert np.max(np.abs(f.S - exact)[f.mask]) < 1e-9
    big = f.R > 1e-6 * f.R.max()
    assert np.max(np.abs(f.reconstruct() - psi)[big]) < 1e-8


def test_phase_is_continuous_in_time():
    z, t = lattice(801, 401, t_max=40.0)
    f = polar_decompose(oscillator_ground(z, t), z, t)
    centre = np.argmin(np.abs(z))
    assert np.max(np.abs(np.diff(f.S[:, centre]))) < 0.2
    assert f.S[-1, centre] == pytest.approx(-0.5 * 40.0, abs=1e-9)


def test_node_inside_support_is_reported():
    z, t = lattice(801, 5, z=(-8, 8))
    excited = z * np.exp(-z * z / 2)
    psi = np.broadcast_to(excited, (t.size, z.size))
    with pytest.raises(NodeError) as info:
        polar_decompose(psi, z, t)
    zloc, tloc = info.value.location
    assert abs(zloc) < 0.05 and tloc == 0.0


def test_shape_mismatch():
    z, t = lattice(11, 3)
    with pytest.raises(ShapeError):
        polar_decompose(np.ones((4, 11)), z, t)


def test_traveling_packet_potential_recovered():
    z, t = lattice(801, 201)
    psi = traveling_packet(z, t)
    f = polar_decompose(psi, z, t)
    v = local_potential(f, 1.0)
    exact = traveling_packet_potential(z, t)
    # interior region, away from the lattice edges and deep tails
    core = np.abs(z[None, :] - t[:, None]) < 4.0
    err = np.nanmax(np.abs(v - exact)[core])
    assert err < 5e-3
    z2, t2 = lattice(1601, 401)
    f2 = polar_decompose(traveling_packet(z2, t2), z2, t2)
    v2 = local_potential(f2, 1.0)
    core2 = np.abs(z2[None, :] - t2[:, None]) < 4.0
    err2 = np.nanmax(np.abs(v2 - traveling_packet_potential(z2, t2))[core2])
    assert err / err2 > 3.5


def test_oscillator_ground_gives_harmonic_potential():
    m, w = 2.0, 1.5
    errs = []
    for n in (801, 1601):
        z, t = lattice(n, 21, z=(-5, 5), t_max=1.0)
        f = polar_decompose(oscillator_ground(z, t, m, w), z, t)
        v = local_potential(f, m)
        core = np.broadcast_to(np.abs(z) < 2.5, v.shape)
        errs.append(np.nanmax(np.abs(v - 0.5 * m * w * w * z * z)[core]))
    # the three-point curvature of R carries an O(h^2) error
    assert errs[0] < 1e-2
    assert errs[0] / errs[1] > 3.9


def test_free_packet_needs_no_potential():
    z, t = lattice(1601, 201, z=(-15, 15))
    f = polar_decompose(free_packet(z, t, sigma=1.0, k0=0.5), z, t)
    v = local_potential(f, 1.0)
    core = np.abs(z[None, :] - 0.5 * t[:, None]) < 3.0
    assert np.nanmax(np.abs(v)[core]) < 1e-3
    assert locality_verdict(free_packet(z, t, sigma=1.0, k0=0.5), z, t, 1.0).local_ok


def test_matched_packet_residual_converges_at_second_order():
    worst = []
    for n_z, n_t in ((401, 101), (801, 201), (1601, 401)):
        z, t = lattice(n_z, n_t)
        worst.append(np.max(continuity_residual(polar_decompose(traveling_packet(z, t), z, t), 1.0)))
    assert worst[0] / worst[1] > 3.5 and worst[1] / worst[2] > 3.5


@pytest.mark.parametrize("factor", [2.0, 0.5, 3.0])
def test_mismatched_packet_residual_matches_closed_form(factor):
    """Normalized residual is exactly |mu - mu0| / mu for a rigid packet."""
    z, t = lattice(1601, 201)
    psi = traveling_packet(z, t, mu=factor)
    r = continuity_residual(polar_decompose(psi, z, t), 1.0)
    assert np.max(np.abs(r[1:-1] - abs(factor - 1.0) / factor)) < 1e-3
    assert np.min(r) > 0.1


def test_static_real_packet_has_zero_residual():
    z, t = lattice(401, 11)
    psi = np.broadcast_to(np.exp(-z * z / 2), (t.size, z.size))
    assert np.max(continuity_residual(polar_decompose(psi, z, t), 1.0)) == 0.0


def test_verdicts_for_reference_packets():
    z, t = lattice(801, 201)
    assert locality_verdict(traveling_packet(z, t), z, t, 1.0).local_ok
    rep = locality_verdict(traveling_packet(z, t, mu=2.0), z, t, 1.0)
    assert not rep.local_ok and rep.max_residual > 0.1
    static = np.broadcast_to(np.exp(-z * z / 2), (t.size, z.size))
    assert locality_verdict(static, z, t, 1.0).local_ok


def test_refinement_trend_is_reported():
    z, t = lattice(201, 51)
    coarse = locality_verdict(traveling_packet(z, t), z, t, 1.0)
    assert not coarse.local_ok and coarse.max_residual > coarse.threshold
    z, t = lattice(801, 201)
    fine = locality_verdict(traveling_packet(z, t), z, t, 1.0)
    assert fine.refinement_ratio == pytest.approx(4.0, rel=0.05)
    bad = locality_verdict(traveling_packet(z, t, mu=2.0), z, t, 1.0)
    assert bad.refinement_ratio == pytest.approx(1.0, rel=0.05)


def test_verdict_is_gauge_robust():
    z, t = lattice(801, 201)
    psi = traveling_packet(z, t)
    twisted = psi * np.exp(-1j * 0.3 * t * t)[:, None]
    a = locality_verdict(psi, z, t, 1.0)
    b = locality_verdict(twisted, z, t, 1.0)
    assert a.local_ok == b.local_ok
    shift = b.potential - a.potential
    expected = np.broadcast_to((0.6 * t)[:, None], shift.shape)
    ok = np.isfinite(shift)
    assert np.max(np.abs(shift - expected)[ok]) < 1e-8
    bad = traveling_packet(z, t, mu=2.0)
    assert not locality_verdict(bad * np.exp(-1j * 0.3 * t * t)[:, None], z, t, 1.0).local_ok


def _evolve_in_potential(n_z, n_t, m=1.0, hbar=1.0):
    z = np.linspace(-8, 8, n_z)
    h = z[1] - z[0]
    pot = 0.5 * z**2 + 0.01 * z**4
    off = np.full(n_z - 1, 1.0)
    lap = (np.diag(off, -1) - 2 * np.eye(n_z) + np.diag(off, 1)) / h**2
    ham = -(hbar**2) / (2 * m) * lap + np.diag(pot)
    psi0 = np.exp(-((z - 1.0) ** 2) / 2).astype(complex)
    psi0 /= np.linalg.norm(psi0)
    t = np.linspace(0, 1.0, n_t)
    sched = HamiltonianSchedule(lambda _: ham, (0, 1), constant=True)
    res = propagate_state(sched, psi0, 0.0, 1.0, t[1] - t[0])
    return z, t, pot, res.states / math.sqrt(h)


def test_dynamics_under_local_potential_is_recognized():
    """A packet evolved under a diagonal potential is local and returns that potential."""
    errs = []
    for n_z, n_t in ((401, 101), (801, 201)):
        z, t, pot, psi = _evolve_in_potential(n_z, n_t)
        rep = locality_verdict(psi, z, t, 1.0)
        region = np.abs(psi) > 1e-3 * np.abs(psi).max()
        region[:, :2] = region[:, -2:] = False
        errs.append(np.nanmax(np.abs(rep.potential - pot[None, :])[region]))
    assert rep.local_ok
    assert errs[1] < 5e-3
    assert errs[0] / errs[1] > 3.5


def test_report_serialization(tmp_path):
    z, t = lattice(81, 9)
    rep = locality_verdict(traveling_packet(z, t), z, t, 1.0)
    rep.to_json(tmp_path / "r.json")
    rep.to_csv(tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data) >= {"local_ok", "max_residual", "threshold", "constraint_note"}
    header = (tmp_path / "r.csv").read_text().splitlines()[0]
    assert header == "z,t,V,residual"
    assert np.loadtxt(tmp_path / "r.csv", delimiter=",", skiprows=1).shape == (81 * 9, 4)
