"""Closed-form scenario builders with their analytic cross-checks.

Two worked systems are provided.  The first is the two-level avoided
crossing ``H_s(G) = [[G, eps], [eps, -G]]`` driven along its ground
state at the variance budget.  The second is a harmonic-oscillator
Gaussian packet whose center and width are steered together,
``x(s) = mu s`` and ``w(s) = w0 / s^2``.  Three helper families are also
provided: latitude circles on the Bloch sphere, random smooth
trajectories, and a rotating mixed qubit.  The test suite and the CLI
both use them.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .driving import (
    DensityTrajectory,
    HamiltonianSchedule,
    ResourceBudget,
    trajectory_hamiltonian,
    trajectory_schedule,
)
from .errors import ConsistencyError, GeometryError
from .gauge import gauge_fix, trivially_fixed
from .reparam import time_of_param
from .state import Grid, StateTrajectory

LZ_CHECK_TOL = 1e-8
KERNEL_CHECK_TOL = 1e-6


# ------------------------------------------------------------ avoided crossing


def lz_hamiltonian(gamma, epsilon):
    return np.array([[gamma, epsilon], [epsilon, -gamma]], dtype=np.complex128)


def _lz_angle(gamma, epsilon):
    return math.atan2(epsilon, gamma)


def _ground(theta):
    return np.array([math.sin(theta / 2), -math.cos(theta / 2)], dtype=np.complex128)


def _ground_dtheta(theta):
    return 0.5 * np.array([math.cos(theta / 2), math.sin(theta / 2)], dtype=np.complex128)


def _excited(theta):
    return np.array([math.cos(theta / 2), math.sin(theta / 2)], dtype=np.complex128)


def _excited_dtheta(theta):
    return 0.5 * np.array([-math.sin(theta / 2), math.cos(theta / 2)], dtype=np.complex128)


def lz_ground(gamma, epsilon):
    """Ground state of ``[[G, eps], [eps, -G]]`` with a real, positive first entry."""
    return _ground(_lz_angle(gamma, epsilon))


def lz_excited(gamma, epsilon):
    return _excited(_lz_angle(gamma, epsilon))


@dataclass(frozen=True)
class LZScenario:
    """Avoided crossing with gap parameter ``epsilon`` swept over ``[-gamma0, gamma0]``."""

    epsilon: float = 1.0
    gamma0: float = 50.0
    omega_max: float = 1.0

    def __post_init__(self):
        for name in ("epsilon", "gamma0", "omega_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def time_of_gamma(self, gamma):
        """Signed minimal time from ``G = 0``: ``arctan(G / eps) / (2 w)``."""
        return np.arctan(np.asarray(gamma) / self.epsilon) / (2.0 * self.omega_max)

    def gamma_of_time(self, t):
        return self.epsilon * np.tan(2.0 * self.omega_max * np.asarray(t))

    @property
    def half_time(self):
        return float(self.time_of_gamma(self.gamma0))

    @property
    def total_time(self):
        return 2.0 * self.half_time

    def optimal_hamiltonian(self):
        w = self.omega_max
        return np.array([[0.0, 1j * w], [-1j * w, 0.0]])

    def graded_lattice(self, n_steps=2048):
        """Parameter lattice uniform in ``asinh(G / eps)``.

        Node density follows the path speed, which peaks at ``G = 0`` and
        decays as ``G^-2``, so Simpson error is spread evenly.
        """
        u = math.asinh(self.gamma0 / self.epsilon)
        return self.epsilon * np.sinh(np.linspace(-u, u, n_steps + 1))


@dataclass(frozen=True)
class LZBuild:
    scenario: LZScenario
    h_system: object
    ground: StateTrajectory
    excited: StateTrajectory
    ground_in_time: object
    schedule: HamiltonianSchedule
    max_schedule_deviation: float


def lz_ground_path(sc):
    """Ground-state trajectory over ``G`` with its analytic derivative."""
    eps = sc.epsilon

    def evaluator(g):
        return lz_ground(g, eps)

    def derivative_fn(g):
        theta = _lz_angle(g, eps)
        return _ground_dtheta(theta) * (-eps / (g * g + eps * eps))

    return StateTrajectory(evaluator, (-sc.gamma0, sc.gamma0), derivative_fn=derivative_fn, name="lz-ground")


def lz_excited_path(sc):
    eps = sc.epsilon

    def evaluator(g):
        return lz_excited(g, eps)

    def derivative_fn(g):
        theta = _lz_angle(g, eps)
        return _excited_dtheta(theta) * (-eps / (g * g + eps * eps))

    return StateTrajectory(evaluator, (-sc.gamma0, sc.gamma0), derivative_fn=derivative_fn, name="lz-excited")


def lz_ground_in_time(sc):
    """Ground path at the minimal-time schedule ``G(t) = eps tan(2 w t)``.

    The mixing angle is linear in time, ``theta = pi/2 - 2 w t``; the path
    is real so it is already parallel transported.
    """
    w = sc.omega_max

    def evaluator(t):
        return _ground(0.5 * math.pi - 2.0 * w * t)

    def derivative_fn(t):
        return -2.0 * w * _ground_dtheta(0.5 * math.pi - 2.0 * w * t)

    traj = StateTrajectory(evaluator, (-sc.half_time, sc.half_time), derivative_fn=derivative_fn, name="lz-ground-t")
    return trivially_fixed(traj)


def lz_build(sc, n_check=100):
    """Assemble the avoided-crossing scenario and verify the constant drive.

    The trajectory Hamiltonian of the time-indexed ground path is compared
    against the constant ``[[0, i w], [-i w, 0]]`` at ``n_check`` times;
    a deviation above ``1e-8`` raises :class:`ConsistencyError`.
    """
    h_opt = sc.optimal_hamiltonian()
    gt = lz_ground_in_time(sc)
    worst = 0.0
    for t in np.linspace(-sc.half_time, sc.half_time, n_check):
        worst = max(worst, float(np.max(np.abs(trajectory_hamiltonian(gt, t) - h_opt))))
    if worst > LZ_CHECK_TOL:
        raise ConsistencyError(f"trajectory Hamiltonian deviates from the constant drive by {worst:.3e}")
    schedule = HamiltonianSchedule(lambda t: h_opt, (-sc.half_time, sc.half_time), constant=True, name="lz-optimal")
    return LZBuild(
        scenario=sc,
        h_system=lambda g: lz_hamiltonian(g, sc.epsilon),
        ground=lz_ground_path(sc),
        excited=lz_excited_path(sc),
        ground_in_time=gt,
        schedule=schedule,
        max_schedule_deviation=worst,
    )


def lz_minimal_time(sc, n_steps=2048):
    """Numerical ``t(G)`` table along the ground path at the budget."""
    gtraj = gauge_fix(lz_ground_path(sc), n_samples=n_steps)
    return time_of_param(gtraj, ResourceBudget(sc.omega_max), lattice=sc.graded_lattice(n_steps))


def adiabatic_sweep_time(gamma0, epsilon):
    """Sweep time of a linear ramp over ``[-gamma0, gamma0]`` with ``eps^2 / rate = 1``.

    At that rate the diabatic transition probability is ``exp(-pi)``; a
    sweep ten times shorter is strongly non-adiabatic.
    """
    return 2.0 * gamma0 / epsilon**2


@dataclass(frozen=True)
class LZSweep:
    """Linear ramp ``G(t) = v t`` on ``[-T/2, T/2]`` with both eigenpaths."""

    epsilon: float
    gamma0: float
    sweep_time: float
    h_system: object = field(repr=False)
    ground: StateTrajectory = field(repr=False)
    excited: StateTrajectory = field(repr=False)

    @property
    def domain(self):
        return (-0.5 * self.sweep_time, 0.5 * self.sweep_time)


def lz_sweep(epsilon, gamma0, sweep_time):
    rate = 2.0 * gamma0 / sweep_time
    domain = (-0.5 * sweep_time, 0.5 * sweep_time)

    def theta(t):
        return _lz_angle(rate * t, epsilon)

    def theta_dot(t):
        g = rate * t
        return -epsilon * rate / (g * g + epsilon * epsilon)

    ground = StateTrajectory(
        lambda t: _ground(theta(t)),
        domain,
        derivative_fn=lambda t: _ground_dtheta(theta(t)) * theta_dot(t),
        name="sweep-ground",
    )
    excited = StateTrajectory(
        lambda t: _excited(theta(t)),
        domain,
        derivative_fn=lambda t: _excited_dtheta(theta(t)) * theta_dot(t),
        name="sweep-excited",
    )
    return LZSweep(
        epsilon=epsilon,
        gamma0=gamma0,
        sweep_time=sweep_time,
        h_system=lambda t: lz_hamiltonian(rate * t, epsilon),
        ground=ground,
        excited=excited,
    )


# ------------------------------------------------------------ Gaussian packet


@dataclass(frozen=True)
class GaussianScenario:
    """Oscillator ground packet with center ``-mu s`` and frequency ``omega0 / s^2``.

    The parameter runs from ``s = 1`` down to ``s_f``.  ``eps_rate`` fixes
    the driving budget through ``int |d_t psi|^2 dz = eps_rate^2``, which the
    minimal-time schedule ``s(t) = exp(-eta eps_rate t)`` saturates.
    """

    m: float = 1.0
    omega0: float = 1.0
    mu: float = 1.0
    eps_rate: float = 1.0
    s_f: float = 0.5
    hbar: float = 1.0
    n_points: int = 4096
    z_min: float = None
    z_max: float = None

    def __post_init__(self):
        for name in ("m", "omega0", "mu", "eps_rate", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.s_f < 1.0:
            raise ValueError("s_f must lie in (0, 1)")

    @property
    def eta(self):
        return math.sqrt(2.0 * self.hbar / (self.mu**2 * self.m * self.omega0 + self.hbar))

    @property
    def sigma_max(self):
        """Amplitude width ``sqrt(hbar / (m omega0))`` of the widest (``s = 1``) packet."""
        return math.sqrt(self.hbar / (self.m * self.omega0))

    @property
    def final_time(self):
        return -math.log(self.s_f) / (self.eta * self.eps_rate)

    @property
    def grid(self):
        lo = -10.0 * self.sigma_max - self.mu if self.z_min is None else self.z_min
        hi = 10.0 * self.sigma_max if self.z_max is None else self.z_max
        return Grid(lo, hi, self.n_points)

    def s_of_t(self, t):
        return np.exp(-self.eta * self.eps_rate * np.asarray(t))

    def t_of_s(self, s):
        return -np.log(np.asarray(s)) / (self.eta * self.eps_rate)

    def center(self, s):
        return -self.mu * s

    def sigma(self, s):
        return self.sigma_max * s

    def packet(self, s, z):
        """``(m w0 / (pi hbar s^2))^(1/4) exp(-m w0 (z + mu s)^2 / (2 hbar s^2))``."""
        a = self.m * self.omega0 / self.hbar
        return (a / (math.pi * s * s)) ** 0.25 * np.exp(-a * (z + self.mu * s) ** 2 / (2.0 * s * s))

    def packet_ds(self, s, z):
        a = self.m * self.omega0 / self.hbar
        y = z + self.mu * s
        log_d = -0.5 / s - a * self.mu * y / (s * s) + a * y * y / s**3
        return self.packet(s, z) * log_d

    def psi_t(self, t, z):
        return self.packet(float(self.s_of_t(t)), z)

    def psi_dot(self, t, z):
        s = float(self.s_of_t(t))
        return self.packet_ds(s, z) * (-self.eta * self.eps_rate * s)

    def explicit_kernel(self, t, z, zp):
        """Closed-form driving kernel ``H(z, z', t)`` at the minimal-time schedule.

        For this real packet ``H = i hbar (psi_dot(z) psi(z') - psi(z) psi_dot(z'))``;
        expanding ``psi_dot = psi * (alpha + beta y + gamma y^2)`` with
        ``y = z + mu s`` gives the polynomial-times-Gaussian form evaluated
        here directly from ``z`` and ``z'``.
        """
        a = self.m * self.omega0 / self.hbar
        rate = self.eta * self.eps_rate
        s = float(self.s_of_t(t))
        z = np.asarray(z, dtype=float)[:, None]
        zp = np.asarray(zp, dtype=float)[None, :]
        y, yp = z + self.mu * s, zp + self.mu * s
        # d/dt log psi = -rate s * d/ds log psi
        beta = rate * a * self.mu / s
        gamma = -rate * a / (s * s)
        prefactor = math.sqrt(a / (math.pi * s * s))
        gauss = np.exp(-a * (y * y + yp * yp) / (2.0 * s * s))
        poly = beta * (y - yp) + gamma * (y * y - yp * yp)
        return 1j * self.hbar * prefactor * gauss * poly

    def check_geometry(self, margin=6.0):
        """Packet center +- ``margin`` widths must stay inside the grid for s in [s_f, 1]."""
        g = self.grid
        for s in (1.0, self.s_f):
            lo = self.center(s) - margin * self.sigma(s)
            hi = self.center(s) + margin * self.sigma(s)
            if lo < g.z_min or hi > g.z_max:
                raise GeometryError(f"packet at s={s} spans [{lo:.4g}, {hi:.4g}] outside grid [{g.z_min}, {g.z_max}]")


@dataclass(frozen=True)
class GaussianBuild:
    scenario: GaussianScenario
    grid: Grid
    path: StateTrajectory
    trajectory: object
    schedule: HamiltonianSchedule
    kernel_deviation: float


def gaussian_path(sc):
    """Packet trajectory over the parameter ``s`` from 1 to ``s_f``."""
    g = sc.grid
    z = g.z
    return StateTrajectory(
        lambda s: sc.packet(s, z),
        (1.0, sc.s_f),
        derivative_fn=lambda s: sc.packet_ds(s, z),
        grid=g,
        name="gaussian-s",
    )


def gaussian_in_time(sc):
    g = sc.grid
    z = g.z
    traj = StateTrajectory(
        lambda t: sc.psi_t(t, z),
        (0.0, sc.final_time),
        derivative_fn=lambda t: sc.psi_dot(t, z),
        grid=g,
        name="gaussian-t",
    )
    return traj


def kernel_deviation(sc, schedule, times, n_sub=512):
    """Max relative gap between the explicit kernel and the factored one.

    Compared on ``n_sub`` evenly strided grid points (all points when the
    grid is no larger).
    """
    g = sc.grid
    stride = max(1, g.n_points // n_sub)
    idx = np.arange(0, g.n_points, stride)
    z = g.z[idx]
    worst = 0.0
    for t in times:
        generic = schedule(t).kernel(idx, idx)
        explicit = sc.explicit_kernel(t, z, z)
        worst = max(worst, float(np.max(np.abs(explicit - generic)) / np.max(np.abs(generic))))
    return worst


def gaussian_build(sc, n_check=8, n_samples=512):
    """Assemble the packet scenario and cross-check the two kernel routes.

    The path is gauge-fixed numerically (the connection vanishes for the
    real packet, which the gauge fixer verifies), its generic rank-two
    Hamiltonian is compared with :meth:`GaussianScenario.explicit_kernel`,
    and a relative gap above ``1e-6`` raises :class:`ConsistencyError`.
    """
    sc.check_geometry()
    gtraj = gauge_fix(gaussian_in_time(sc), n_samples=n_samples)
    schedule = trajectory_schedule(gtraj, hbar=sc.hbar, name="gaussian")
    gap = kernel_deviation(sc, schedule, np.linspace(0.0, sc.final_time, n_check))
    if gap > KERNEL_CHECK_TOL:
        raise ConsistencyError(f"explicit and factored kernels differ by {gap:.3e} (relative)")
    return GaussianBuild(
        scenario=sc,
        grid=sc.grid,
        path=gaussian_path(sc),
        trajectory=gtraj,
        schedule=schedule,
        kernel_deviation=gap,
    )


def gaussian_budget_rate(sc):
    """Budget ``Delta H / hbar = eps_rate`` saturated by the schedule."""
    return sc.eps_rate


# ------------------------------------------------------------ test families


def latitude_circle(theta, speed=1.0, periods=1.0):
    """Bloch-sphere latitude ``(cos(theta/2), e^{i w t} sin(theta/2))``.

    Runs for ``periods`` full turns at angular speed ``speed``.
    """
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    t1 = 2.0 * math.pi * periods / speed

    def evaluator(t):
        return np.array([c, s * np.exp(1j * speed * t)])

    def derivative_fn(t):
        return np.array([0.0, 1j * speed * s * np.exp(1j * speed * t)])

    return StateTrajectory(evaluator, (0.0, t1), derivative_fn=derivative_fn, name=f"latitude-{theta:.6g}")


def random_smooth_trajectory(dim, rng, n_modes=3, duration=1.0, amplitude=1.0):
    """Normalized random trigonometric polynomial ``v(t) / ||v(t)||``.

    ``v(t) = c0 + sum_k (a_k cos(k t) + b_k sin(k t))`` with complex Gaussian
    coefficients; ``c0`` is scaled up so ``v`` never vanishes in practice.
    """

    def cgauss(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    c0 = 3.0 * cgauss(dim)
    a = amplitude * cgauss(n_modes, dim) / np.sqrt(dim)
    b = amplitude * cgauss(n_modes, dim) / np.sqrt(dim)
    k = np.arange(1, n_modes + 1)[:, None]

    def raw(t):
        return c0 + np.sum(a * np.cos(k * t) + b * np.sin(k * t), axis=0)

    def raw_dot(t):
        return np.sum(k * (-a * np.sin(k * t) + b * np.cos(k * t)), axis=0)

    def evaluator(t):
        v = raw(t)
        return v / np.linalg.norm(v)

    def derivative_fn(t):
        v, dv = raw(t), raw_dot(t)
        n = np.linalg.norm(v)
        psi = v / n
        return dv / n - psi * np.real(np.vdot(psi, dv)) / n

    return StateTrajectory(evaluator, (0.0, duration), derivative_fn=derivative_fn, name=f"random-{dim}")


def rotating_qubit(weights=(0.7, 0.3), speed=1.0, axis="y", tilt=math.pi / 3):
    """Qubit density matrix whose eigenbasis rotates at angular rate ``speed``.

    ``axis="y"``: eigenvectors ``(cos(k t/2), sin(k t/2))`` and
    ``(-sin(k t/2), cos(k t/2))``, i.e. ``exp(-i k t S_y)`` applied to the
    computational basis.  They are real, hence already parallel
    transported, and the driving Hamiltonian is ``k S_y``.

    ``axis="z"``: eigenvectors ``(cos(a/2), e^{i k t} sin(a/2))`` and their
    orthogonal partner with ``a = tilt``; these carry a Berry connection
    and must be gauge-fixed before driving.

    One full rotation of the Bloch vector takes ``2 pi / k``.
    """
    t1 = 2.0 * math.pi / speed
    if axis == "y":
        half = 0.5 * speed

        def up(t):
            return np.array([math.cos(half * t), math.sin(half * t)], dtype=np.complex128)

        def up_dot(t):
            return half * np.array([-math.sin(half * t), math.cos(half * t)], dtype=np.complex128)

        def down(t):
            return np.array([-math.sin(half * t), math.cos(half * t)], dtype=np.complex128)

        def down_dot(t):
            return -half * np.array([math.cos(half * t), math.sin(half * t)], dtype=np.complex128)

    elif axis == "z":
        c, s = math.cos(tilt / 2), math.sin(tilt / 2)

        def up(t):
            return np.array([c, s * np.exp(1j * speed * t)])

        def up_dot(t):
            return np.array([0.0, 1j * speed * s * np.exp(1j * speed * t)])

        def down(t):
            return np.array([-s * np.exp(-1j * speed * t), c])

        def down_dot(t):
            return np.array([1j * speed * s * np.exp(-1j * speed * t), 0.0])

    else:
        raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")

    vecs = (
        StateTrajectory(up, (0.0, t1), derivative_fn=up_dot, name="up"),
        StateTrajectory(down, (0.0, t1), derivative_fn=down_dot, name="down"),
    )
    return DensityTrajectory(weights, vecs)


def spin_y(hbar=1.0):
    return 0.5 * hbar * np.array([[0.0, -1j], [1j, 0.0]])


__all__ = [
    "GaussianBuild",
    "GaussianScenario",
    "LZBuild",
    "LZScenario",
    "LZSweep",
    "adiabatic_sweep_time",
    "gaussian_budget_rate",
    "gaussian_build",
    "gaussian_in_time",
    "gaussian_path",
    "kernel_deviation",
    "latitude_circle",
    "lz_build",
    "lz_excited",
    "lz_ground",
    "lz_ground_in_time",
    "lz_ground_path",
    "lz_hamiltonian",
    "lz_minimal_time",
    "lz_sweep",
    "random_smooth_trajectory",
    "rotating_qubit",
    "spin_y",
]
