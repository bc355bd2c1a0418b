"""Normalized states, inner products and state trajectories.

Discrete states are plain complex numpy vectors.  Wavefunctions on a
uniform 1-d grid carry a :class:`Grid`; their inner products use the
composite trapezoid rule, so every routine that takes ``grid=None`` works
on discrete vectors and every routine given a grid works on sampled
wavefunctions.
"""

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import AccuracyWarning, DegeneratePairError, ShapeError

DEGENERATE_TOL = 1e-12


def _frozen(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid ``z_min .. z_max`` with ``n_points`` nodes."""

    z_min: float
    z_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 2 or not self.z_max > self.z_min:
            raise ShapeError(f"degenerate grid {self}")

    @property
    def dz(self):
        return (self.z_max - self.z_min) / (self.n_points - 1)

    @cached_property
    def z(self):
        return _frozen(np.linspace(self.z_min, self.z_max, self.n_points))

    @cached_property
    def weights(self):
        """Trapezoid quadrature weights."""
        w = np.full(self.n_points, self.dz)
        w[0] = w[-1] = 0.5 * self.dz
        return _frozen(w)

    def integrate(self, values):
        return np.sum(self.weights * values, axis=-1)


@dataclass(frozen=True)
class GridWavefunction:
    samples: np.ndarray
    grid: Grid

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.shape != (self.grid.n_points,):
            raise ShapeError(f"expected {self.grid.n_points} samples, got shape {samples.shape}")
        object.__setattr__(self, "samples", _frozen(samples))

    @property
    def norm(self):
        return float(np.sqrt(self.grid.integrate(np.abs(self.samples) ** 2)))


def _unpack(a, grid):
    if isinstance(a, GridWavefunction):
        if grid is not None and grid != a.grid:
            raise ShapeError("grid mismatch between wavefunction and requested grid")
        return a.samples, a.grid
    return np.asarray(a), grid


def inner(a, b, grid=None):
    """<a|b>, conjugate-linear in ``a``.

    With a grid (passed explicitly or carried by :class:`GridWavefunction`
    operands) the integral is the composite trapezoid rule.
    """
    a, ga = _unpack(a, grid)
    b, gb = _unpack(b, grid)
    if ga != gb:
        raise ShapeError("operands live on different grids")
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if ga is None:
        return complex(np.vdot(a, b))
    if a.shape[-1] != ga.n_points:
        raise ShapeError(f"{a.shape[-1]} samples on a {ga.n_points}-point grid")
    return complex(np.sum(ga.weights * a.conj() * b))


def norm(a, grid=None):
    return float(np.sqrt(abs(inner(a, a, grid))))


def normalize(a, grid=None):
    """Return a new unit-norm copy of ``a`` (read-only)."""
    if isinstance(a, GridWavefunction):
        return GridWavefunction(a.samples / a.norm, a.grid)
    a = np.asarray(a, dtype=np.complex128)
    return _frozen(a / norm(a, grid))


def basis_state(n, k):
    e = np.zeros(n, dtype=np.complex128)
    e[k] = 1.0
    return _frozen(e)


def gram_schmidt_partner(psi_i, psi_f, grid=None):
    """Unit vector in span{psi_i, psi_f} orthogonal to ``psi_i``.

    ``(psi_f - <psi_i|psi_f> psi_i) / sin(Omega)`` with
    ``sin(Omega) = sqrt(1 - |<psi_i|psi_f>|^2)``, evaluated as the norm of
    the numerator.  Both inputs must be normalized.
    """
    wrap = isinstance(psi_f, GridWavefunction)
    a, grid = _unpack(psi_i, grid)
    b, grid = _unpack(psi_f, grid)
    overlap = inner(a, b, grid)
    # ||f - <i|f> i|| equals sin(Omega) without the cancellation in 1 - |<i|f>|^2
    residual = b - overlap * a
    sin_omega = norm(residual, grid)
    if sin_omega < DEGENERATE_TOL:
        raise DegeneratePairError(f"states are parallel (|<i|f>| = {abs(overlap):.16f})")
    partner = residual / sin_omega
    # one re-orthogonalization pass keeps the 1e-12 guarantee when sin(Omega) is small
    partner = partner - inner(a, partner, grid) * a
    partner = partner / norm(partner, grid)
    if wrap:
        return GridWavefunction(partner, grid)
    return _frozen(partner)


@dataclass(frozen=True)
class StateTrajectory:
    """A map ``s -> state`` on ``domain`` with derivative access.

    ``evaluator(s)`` returns a normalized complex vector; for grid
    trajectories it returns the samples on ``grid``.  When ``derivative_fn``
    is omitted, :func:`derivative` falls back to central differences with
    step ``fd_step`` (default ``1e-5`` times the domain length).
    """

    evaluator: object
    domain: tuple = (0.0, 1.0)
    derivative_fn: object = None
    fd_step: float = None
    grid: Grid = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        s0, s1 = (float(x) for x in self.domain)
        object.__setattr__(self, "domain", (s0, s1))
        if self.fd_step is None:
            length = abs(s1 - s0) or 1.0
            object.__setattr__(self, "fd_step", 1e-5 * length)

    def __call__(self, s):
        return _frozen(np.asarray(self.evaluator(s), dtype=np.complex128))

    def derivative(self, s):
        return derivative(self, s)

    def inner(self, a, b):
        return inner(a, b, self.grid)

    def norm(self, a):
        return norm(a, self.grid)

    @property
    def has_analytic_derivative(self):
        return self.derivative_fn is not None

    def max_norm_error(self, n=64):
        """Largest deviation from unit norm over ``n`` evenly spaced samples."""
        s = np.linspace(*self.domain, n)
        return max(abs(self.norm(self(x)) - 1.0) for x in s)


def derivative(traj, s):
    """d psi / d s at ``s``.

    Analytic when the trajectory supplies one, otherwise the central
    difference ``(psi(s+h) - psi(s-h)) / 2h``.  Within ``h`` of a domain end
    the second-order one-sided stencil is used and an
    :class:`~statedrive.errors.AccuracyWarning` is emitted.
    """
    if traj.derivative_fn is not None:
        return _frozen(np.asarray(traj.derivative_fn(s), dtype=np.complex128))
    h = traj.fd_step
    lo, hi = min(traj.domain), max(traj.domain)
    if s - h >= lo - 1e-15 and s + h <= hi + 1e-15:
        return _frozen((traj(s + h) - traj(s - h)) / (2.0 * h))
    warnings.warn(f"one-sided derivative at s={s} (domain edge)", AccuracyWarning, stacklevel=2)
    sign = 1.0 if s - h < lo else -1.0
    hh = sign * h
    d = (-3.0 * traj(s) + 4.0 * traj(s + hh) - traj(s + 2 * hh)) / (2.0 * hh)
    return _frozen(d)


def fidelity(a, b, grid=None):
    """|<a|b>|^2 for normalized states."""
    return abs(inner(a, b, grid)) ** 2
