"""U(1) gauge fixing of state trajectories.

The Berry connection ``A(s) = -i <d_s psi | psi>`` is integrated into a
phase ``phi(s)`` with ``phi(s0) = 0``; the gauge-fixed trajectory
``e^{i phi(s)} psi(s)`` then satisfies the parallel-transport condition
``<d_s psi~ | psi~> = 0``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._quad import midpoints, simpson_cumulative
from .errors import GaugeResidualError, NonUnitaryTrajectoryError
from .state import StateTrajectory

CONNECTION_TOL = 1e-8
RESIDUAL_TOL = 1e-8
DEFAULT_SAMPLES = 2048


def connection_with_residue(traj, s):
    """Berry connection at ``s`` and the real part of <d psi|psi> it discards."""
    psi = traj(s)
    raw = traj.inner(traj.derivative(s), psi)
    return raw.imag, abs(raw.real)


def berry_connection(traj, s):
    """-i <d_s psi|psi> at ``s``; real for any norm-preserving trajectory."""
    value, residue = connection_with_residue(traj, s)
    if residue > CONNECTION_TOL:
        raise NonUnitaryTrajectoryError(
            f"Re<d psi|psi> = {residue:.3e} at s={s}; trajectory does not conserve norm"
        )
    return value


def gauge_phase(traj, s0, s1, n_steps=DEFAULT_SAMPLES):
    """Integral of the Berry connection from ``s0`` to ``s1``.

    Composite Simpson over ``n_steps`` intervals (each with its midpoint).
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    if s0 == s1:
        return 0.0
    nodes = np.linspace(s0, s1, n_steps + 1)
    f_nodes = np.array([berry_connection(traj, s) for s in nodes])
    f_mids = np.array([berry_connection(traj, s) for s in midpoints(nodes)])
    return float(simpson_cumulative(nodes, f_nodes, f_mids)[-1])


@dataclass(frozen=True)
class GaugeFixedTrajectory(StateTrajectory):
    """``psi~(s) = e^{i phi(s)} psi(s)`` with its phase bookkeeping.

    Behaves as a :class:`StateTrajectory` for ``psi~`` (call it, take
    ``derivative``).  ``phase`` and ``phase_rate`` expose ``phi`` and
    ``d phi/ds``; ``base`` is the original trajectory.
    """

    base: StateTrajectory = None
    phase_fn: object = None
    rate_fn: object = None
    lattice: np.ndarray = None
    phase_samples: np.ndarray = None
    max_residual: float = 0.0
    max_imag_residue: float = 0.0

    def phase(self, s):
        return float(self.phase_fn(s))

    def phase_rate(self, s):
        return float(self.rate_fn(s))

    def gauge_residual(self, s):
        """|<d_s psi~|psi~>| at ``s`` (zero for an exact parallel transport)."""
        return abs(self.inner(self.derivative(s), self(s)))


def gauge_fix(traj, n_samples=DEFAULT_SAMPLES, tol=RESIDUAL_TOL):
    """Gauge-fix ``traj`` on an ``n_samples`` lattice over its domain.

    The phase is accumulated by composite Simpson and interpolated with a
    cubic Hermite spline whose node slopes are the connection itself.  The
    rate ``d phi/ds`` entering the gauge-fixed derivative is the connection
    evaluated directly at the query point, so the parallel-transport
    residual does not inherit interpolation error.  Raises
    :class:`GaugeResidualError` when any lattice node has residual > ``tol``.
    """
    s0, s1 = traj.domain
    nodes = np.linspace(s0, s1, n_samples)
    rates, residues = zip(*(connection_with_residue(traj, s) for s in nodes))
    mid_rates, mid_residues = zip(*(connection_with_residue(traj, s) for s in midpoints(nodes)))
    max_imag = max(max(residues), max(mid_residues))
    if max_imag > CONNECTION_TOL:
        raise NonUnitaryTrajectoryError(f"Re<d psi|psi> reaches {max_imag:.3e}; trajectory does not conserve norm")
    rates = np.asarray(rates)
    phases = simpson_cumulative(nodes, rates, np.asarray(mid_rates))
    # CubicHermiteSpline wants increasing abscissae
    order = slice(None) if s1 >= s0 else slice(None, None, -1)
    spline = CubicHermiteSpline(nodes[order], phases[order], rates[order])

    def rate_fn(s):
        return connection_with_residue(traj, s)[0]

    def evaluator(s):
        return np.exp(1j * spline(s)) * traj(s)

    def derivative_fn(s):
        psi = traj(s)
        d = traj.derivative(s)
        rate = traj.inner(d, psi).imag
        return np.exp(1j * spline(s)) * (d + 1j * rate * psi)

    g = GaugeFixedTrajectory(
        evaluator=evaluator,
        domain=traj.domain,
        derivative_fn=derivative_fn,
        fd_step=traj.fd_step,
        grid=traj.grid,
        name=traj.name,
        base=traj,
        phase_fn=spline,
        rate_fn=rate_fn,
        lattice=nodes,
        phase_samples=phases,
        max_imag_residue=float(max_imag),
    )
    residual = max(g.gauge_residual(s) for s in nodes)
    if residual > tol:
        raise GaugeResidualError(f"gauge residual {residual:.3e} exceeds {tol:.1e}", residual)
    object.__setattr__(g, "max_residual", float(residual))
    return g


def trivially_fixed(traj):
    """Wrap an already parallel-transported trajectory with zero phase."""

    def zero(s):
        return 0.0

    return GaugeFixedTrajectory(
        evaluator=traj.evaluator,
        domain=traj.domain,
        derivative_fn=traj.derivative_fn,
        fd_step=traj.fd_step,
        grid=traj.grid,
        name=traj.name,
        base=traj,
        phase_fn=zero,
        rate_fn=zero,
    )
