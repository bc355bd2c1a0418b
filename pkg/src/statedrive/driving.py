"""Hamiltonians that drive prescribed states.

Covers the fixed-endpoint brachistochrone, the trajectory-driving
Hamiltonian ``H = i(|d psi~><psi~| - |psi~><d psi~|) + phi_dot * 1`` with
its mean/variance diagnostics, the counterdiabatic ``H'`` and control
term, and the mixed-state generalization.

Operators on discrete systems are dense ``(n, n)`` arrays.  On a spatial
grid the trajectory Hamiltonian is rank two and is returned as a
:class:`Rank2Kernel` holding the two factors instead of an ``n x n``
kernel.
"""

from dataclasses import dataclass

import numpy as np

from ._quad import midpoints, simpson_cumulative
from .errors import (
    CompletenessError,
    ConsistencyError,
    GaugeResidualError,
    NotAnEigenpathError,
    OrthonormalityDriftError,
    ShapeError,
)
from .gauge import gauge_fix
from .state import Grid, gram_schmidt_partner, inner, norm

HERMITIAN_TOL = 1e-10
GAUGE_TOL = 1e-6
GRAM_TOL = 1e-8
EIGEN_TOL = 1e-6


@dataclass(frozen=True)
class ResourceBudget:
    """Upper bound ``omega_max`` on the energy uncertainty Delta H."""

    omega_max: float

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ValueError(f"omega_max must be positive, got {self.omega_max}")


@dataclass(frozen=True)
class Rank2Kernel:
    """``H = scale * i(|right><left| - |left><right|) + shift * 1`` on a grid.

    The integral kernel is
    ``H(z, z') = scale * i [right(z) left*(z') - left(z) right*(z')]``
    plus ``shift * delta(z - z')``; brackets use the grid's trapezoid rule.
    """

    left: np.ndarray
    right: np.ndarray
    grid: Grid
    scale: float = 1.0
    shift: float = 0.0

    def apply(self, phi):
        g = self.grid
        return self.scale * 1j * (self.right * inner(self.left, phi, g) - self.left * inner(self.right, phi, g)) + (
            self.shift * phi
        )

    def kernel(self, z_index=slice(None), zp_index=slice(None)):
        """Dense samples of ``H(z, z')`` without the diagonal shift."""
        r, l = self.right, self.left
        return self.scale * 1j * (
            np.outer(r[z_index], l[zp_index].conj()) - np.outer(l[z_index], r[zp_index].conj())
        )

    def expectation(self, phi):
        return inner(phi, self.apply(phi), self.grid)


class HamiltonianSchedule:
    """Time-dependent Hamiltonian ``t -> H(t)`` on ``domain``.

    ``evaluator`` returns a dense Hermitian matrix or a :class:`Rank2Kernel`.
    ``constant=True`` lets the propagator reuse one step operator.
    """

    def __init__(self, evaluator, domain, hbar=1.0, constant=False, name=""):
        self.evaluator = evaluator
        self.domain = (float(domain[0]), float(domain[1]))
        self.hbar = hbar
        self.constant = constant
        self.name = name

    def __call__(self, t):
        return self.evaluator(t)

    def hermiticity_residual(self, t):
        h = self(t)
        if isinstance(h, Rank2Kernel):
            k = h.kernel()
            return float(np.max(np.abs(k - k.conj().T)))
        return float(np.max(np.abs(h - h.conj().T)))

    def __repr__(self):
        return f"HamiltonianSchedule({self.name or 'anonymous'}, domain={self.domain})"


def _apply(h, phi):
    if isinstance(h, Rank2Kernel):
        return h.apply(phi)
    return h @ phi


def _check_hermitian(h, tol=HERMITIAN_TOL):
    res = float(np.max(np.abs(h - h.conj().T)))
    if res > tol:
        raise ConsistencyError(f"operator not Hermitian: residual {res:.3e}")
    return h


# ------------------------------------------------------------ fixed endpoints


def brachistochrone_hamiltonian(psi_i, psi_f, budget):
    """Time-independent optimal H = i w (|f'><i| - |i><f'|).

    ``f'`` is the Gram-Schmidt partner of ``psi_f`` with respect to
    ``psi_i``; the result is rank two with eigenvalues ``+-w``.  The target
    is first rephased so that ``<psi_i|psi_f>`` is real and nonnegative:
    the rotation in span{i, f'} only reaches the ray of ``psi_f`` from
    that representative.  Real overlaps are unaffected.
    """
    psi_i = np.asarray(psi_i, dtype=np.complex128)
    psi_f = np.asarray(psi_f, dtype=np.complex128)
    overlap = np.vdot(psi_i, psi_f)
    if abs(overlap) > 0.0:
        psi_f = psi_f * (abs(overlap) / overlap)
    partner = gram_schmidt_partner(psi_i, psi_f)
    w = budget.omega_max
    h = 1j * w * (np.outer(partner, psi_i.conj()) - np.outer(psi_i, partner.conj()))
    return _check_hermitian(h)


def brachistochrone_time(psi_i, psi_f, budget, grid=None):
    """T = arccos|<psi_i|psi_f>| / w, in ``[0, pi / 2w]``."""
    overlap = min(abs(inner(psi_i, psi_f, grid)), 1.0)
    return float(np.arccos(overlap) / budget.omega_max)


# ------------------------------------------------------------ trajectories


def trajectory_hamiltonian(gtraj, t, include_phase_term=False, hbar=1.0, gauge_tol=GAUGE_TOL):
    """Hamiltonian driving the gauge-fixed trajectory at time ``t``.

    ``hbar * i(|d psi~><psi~| - |psi~><d psi~|)``, plus ``hbar * phi_dot * 1``
    when ``include_phase_term`` is set (that version drives the original,
    un-fixed ``gtraj.base``).  Returns a dense matrix for discrete
    trajectories and a :class:`Rank2Kernel` on grids.
    """
    psi = gtraj(t)
    d = gtraj.derivative(t)
    residual = abs(gtraj.inner(d, psi))
    if residual > gauge_tol:
        raise GaugeResidualError(f"<d psi~|psi~> = {residual:.3e} at t={t}", residual)
    shift = hbar * gtraj.phase_rate(t) if include_phase_term else 0.0
    if gtraj.grid is not None:
        return Rank2Kernel(left=psi, right=d, grid=gtraj.grid, scale=hbar, shift=shift)
    h = hbar * 1j * (np.outer(d, psi.conj()) - np.outer(psi, d.conj()))
    if shift:
        h = h + shift * np.eye(psi.shape[0])
    return _check_hermitian(h)


def trajectory_schedule(gtraj, include_phase_term=False, hbar=1.0, name=""):
    def evaluator(t):
        return trajectory_hamiltonian(gtraj, t, include_phase_term=include_phase_term, hbar=hbar)

    return HamiltonianSchedule(evaluator, gtraj.domain, hbar=hbar, name=name or gtraj.name)


@dataclass(frozen=True)
class DrivingDiagnostics:
    """Mean and variance of the driving Hamiltonian, computed two ways.

    ``mean``/``variance`` come from the closed forms ``phi_dot`` and
    ``<d psi|d psi> - phi_dot^2``; ``op_mean``/``op_variance`` from the
    constructed operator itself.
    """

    t: float
    mean: float
    variance: float
    op_mean: float
    op_variance: float

    @property
    def discrepancy(self):
        return max(abs(self.mean - self.op_mean), abs(self.variance - self.op_variance))


def diagnostics(gtraj, t, hbar=1.0):
    psi = gtraj.base(t)
    d = gtraj.base.derivative(t)
    rate = gtraj.phase_rate(t)
    mean = hbar * rate
    variance = hbar**2 * (gtraj.norm(d) ** 2 - rate**2)
    if variance < -1e-12 * max(1.0, hbar**2):
        raise ConsistencyError(f"negative variance {variance:.3e} at t={t}")
    h = trajectory_hamiltonian(gtraj, t, include_phase_term=True, hbar=hbar)
    h_psi = _apply(h, psi)
    op_mean = gtraj.inner(psi, h_psi).real
    op_variance = gtraj.norm(h_psi) ** 2 - op_mean**2
    return DrivingDiagnostics(
        t=float(t),
        mean=float(mean),
        variance=max(float(variance), 0.0),
        op_mean=float(op_mean),
        op_variance=max(float(op_variance), 0.0),
    )


@dataclass(frozen=True)
class AccessibilityReport:
    accessible: bool
    worst_margin: float
    worst_t: float

    def __bool__(self):
        return self.accessible


def accessible(gtraj, budget, n_samples=257, rtol=1e-8):
    """Check ``||d psi(t)|| <= sqrt(w_max^2 + phi_dot(t)^2)`` along the path.

    The margin is the right side minus the left side; equality (margin 0,
    within ``rtol * w_max``) is the minimal-time case and counts as
    accessible.
    """
    w = budget.omega_max
    ts = np.linspace(*gtraj.domain, n_samples)
    margins = np.empty(n_samples)
    for k, t in enumerate(ts):
        speed = gtraj.norm(gtraj.base.derivative(t))
        margins[k] = np.sqrt(w**2 + gtraj.phase_rate(t) ** 2) - speed
    k = int(np.argmin(margins))
    return AccessibilityReport(
        accessible=bool(margins[k] >= -rtol * w),
        worst_margin=float(margins[k]),
        worst_t=float(ts[k]),
    )


# ------------------------------------------------------------ counterdiabatic


def _basis_at(trajs, t):
    vecs = np.array([tr(t) for tr in trajs]).T
    ders = np.array([tr.derivative(t) for tr in trajs]).T
    return vecs, ders


def _check_gram(vecs, tol=GRAM_TOL):
    gram = vecs.conj().T @ vecs
    drift = float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
    if drift > tol:
        raise OrthonormalityDriftError(f"eigenbasis Gram matrix off identity by {drift:.3e}")


def counterdiabatic_hprime(eigentrajectories, t, tol=GRAM_TOL):
    """``H'(t) = i sum_n |d psi_n><psi_n|`` over a complete orthonormal basis.

    Hermiticity is measured, not imposed: it holds only because the basis
    is complete and stays orthonormal.
    """
    vecs, ders = _basis_at(eigentrajectories, t)
    dim, count = vecs.shape
    if count != dim:
        raise CompletenessError(f"{count} eigentrajectories for a {dim}-dimensional space")
    _check_gram(vecs, tol)
    h = 1j * ders @ vecs.conj().T
    res = float(np.max(np.abs(h - h.conj().T)))
    if res > tol:
        raise OrthonormalityDriftError(f"H' non-Hermitian by {res:.3e}; basis derivatives inconsistent")
    miss = float(np.max(np.abs(h @ vecs - 1j * ders)))
    if miss > EIGEN_TOL:
        raise ConsistencyError(f"i d psi_n != H' psi_n (max deviation {miss:.3e})")
    return h


def hprime_schedule(eigentrajectories, name="H'"):
    domain = eigentrajectories[0].domain
    return HamiltonianSchedule(lambda t: counterdiabatic_hprime(eigentrajectories, t), domain, name=name)


def _at(h, t):
    return h(t) if callable(h) else np.asarray(h)


def counterdiabatic_control(h_system, h_prime, t):
    """Control term ``H_CD = -(H_s - H')``, so that ``H_s + H_CD = H'``."""
    hs = _at(h_system, t)
    hp = _at(h_prime, t)
    if hs.shape != hp.shape:
        raise ShapeError(f"H_s {hs.shape} vs H' {hp.shape}")
    return hp - hs


@dataclass(frozen=True)
class PhaseDecomposition:
    """Dynamic and geometric phases accumulated by one eigenpath.

    ``geometric`` is the connection integral of ``i<psi_n|d psi_n>``;
    ``geometric_via_hprime`` integrates ``<psi_n|H'|psi_n>`` instead.
    """

    t: float
    dynamic: float
    geometric: float
    geometric_via_hprime: float


def phase_decomposition(h_system, eigenbasis, band, t, t0=None, n_steps=256, tol=1e-6):
    """Dynamic and Berry phases of ``eigenbasis[band]`` from ``t0`` to ``t``.

    ``eigenbasis`` is the complete list of instantaneous eigenpaths of
    ``h_system`` (needed to build ``H'``); ``band`` selects the one whose
    phases are reported.
    """
    traj = eigenbasis[band]
    t0 = traj.domain[0] if t0 is None else t0
    if t == t0:
        return PhaseDecomposition(float(t), 0.0, 0.0, 0.0)

    def integrands(s):
        psi = traj(s)
        hs = _at(h_system, s)
        energy = inner(psi, hs @ psi).real
        resid = norm(hs @ psi - energy * psi)
        if resid > EIGEN_TOL:
            raise NotAnEigenpathError(f"||(H_s - E_n) psi_n|| = {resid:.3e} at t={s}")
        berry = (1j * inner(psi, traj.derivative(s))).real
        hp = counterdiabatic_hprime(eigenbasis, s)
        via_h = inner(psi, hp @ psi).real
        return np.array([energy, berry, via_h])

    nodes = np.linspace(t0, t, n_steps + 1)
    f_nodes = np.array([integrands(s) for s in nodes])
    f_mids = np.array([integrands(s) for s in midpoints(nodes)])
    total = simpson_cumulative(nodes, f_nodes, f_mids)[-1]
    out = PhaseDecomposition(float(t), -float(total[0]), float(total[1]), float(total[2]))
    if abs(out.geometric - out.geometric_via_hprime) > tol:
        raise ConsistencyError(
            f"Berry phase routes disagree: {out.geometric:.12g} vs {out.geometric_via_hprime:.12g}"
        )
    return out


# ------------------------------------------------------------ mixed states


@dataclass(frozen=True)
class DensityTrajectory:
    """``rho(t) = sum_n p_n |n(t)><n(t)>`` with fixed weights."""

    weights: tuple
    eigenvectors: tuple

    def __post_init__(self):
        p = np.asarray(self.weights, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be a probability vector, got {self.weights}")
        if len(self.eigenvectors) != len(p):
            raise ShapeError("one eigenvector trajectory per weight is required")
        object.__setattr__(self, "weights", tuple(float(x) for x in p))
        object.__setattr__(self, "eigenvectors", tuple(self.eigenvectors))

    @property
    def domain(self):
        return self.eigenvectors[0].domain

    def basis(self, t):
        return _basis_at(self.eigenvectors, t)

    def rho(self, t):
        vecs, _ = self.basis(t)
        return (vecs * np.asarray(self.weights)) @ vecs.conj().T

    def check_orthonormal(self, t, tol=GRAM_TOL):
        _check_gram(self.basis(t)[0], tol)

    def gauge_fixed(self, n_samples=2048):
        return DensityTrajectory(self.weights, tuple(gauge_fix(v, n_samples) for v in self.eigenvectors))


def _mixed_basis(dtraj, t, gauge_tol):
    vecs, ders = dtraj.basis(t)
    dim, count = vecs.shape
    if count != dim:
        raise CompletenessError(f"{count} eigenvectors for a {dim}-dimensional space")
    _check_gram(vecs)
    resid = np.abs(np.einsum("in,in->n", ders.conj(), vecs))
    if np.max(resid) > gauge_tol:
        raise GaugeResidualError(f"eigenvectors not gauge-fixed (residual {np.max(resid):.3e})", float(np.max(resid)))
    return vecs, ders


def mixed_hamiltonian(dtraj, t, gauge_tol=GAUGE_TOL):
    """``(i/2) sum_n (|d n~><n~| - |n~><d n~|)`` for a gauge-fixed eigenbasis.

    The symmetric form and ``i sum_n |d n~><n~|`` are both built; they must
    agree because ``sum_n |n~><n~| = 1`` has zero time derivative.
    """
    vecs, ders = _mixed_basis(dtraj, t, gauge_tol)
    outer_dn = ders @ vecs.conj().T
    symmetric = 0.5j * (outer_dn - outer_dn.conj().T)
    one_sided = 1j * outer_dn
    gap = float(np.max(np.abs(symmetric - one_sided)))
    if gap > GRAM_TOL:
        raise OrthonormalityDriftError(f"symmetric and one-sided forms differ by {gap:.3e}")
    return _check_hermitian(symmetric)


def mixed_schedule(dtraj, name="mixed"):
    return HamiltonianSchedule(lambda t: mixed_hamiltonian(dtraj, t), dtraj.domain, name=name)


def mixed_variance(dtraj, t, gauge_tol=GAUGE_TOL):
    """``sum_{n,m} p_m |<m~|d n~>|^2``, checked against tr(rho H^2) - tr(rho H)^2."""
    vecs, ders = _mixed_basis(dtraj, t, gauge_tol)
    p = np.asarray(dtraj.weights)
    overlaps = vecs.conj().T @ ders  # [m, n] = <m~|d n~>
    variance = float(np.sum(p[:, None] * np.abs(overlaps) ** 2))
    h = mixed_hamiltonian(dtraj, t, gauge_tol)
    rho = (vecs * p) @ vecs.conj().T
    trace_form = float(np.trace(rho @ h @ h).real - np.trace(rho @ h).real ** 2)
    if abs(variance - trace_form) > 1e-8:
        raise ConsistencyError(f"variance {variance:.12g} vs trace formula {trace_form:.12g}")
    return variance
