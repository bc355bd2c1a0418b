"""Propagation of states and density matrices under a schedule.

Every step applies the exact exponential of the Hamiltonian sampled at the
step midpoint, ``exp(-i H(t + dt/2) dt / hbar)``.  Steps are therefore
unitary to rounding and any fidelity loss is attributable to the schedule
(and the second-order midpoint sampling), not to integrator drift.  Dense
operators are exponentiated by eigendecomposition; rank-two grid kernels
in closed form inside the two-dimensional span of their factors.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .driving import Rank2Kernel
from .errors import IntegratorFailureError, ShapeError

NORM_TOL = 1e-8
SPECTRUM_TOL = 1e-8
CHUNK = 512


def default_dt(omega_max, hbar=1.0):
    """``1e-4`` of the natural period ``hbar / omega_max``."""
    return 1e-4 * hbar / omega_max


def _step_grid(t0, t1, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t1 - t0
    n = max(1, math.ceil(abs(span) / dt - 1e-9)) if span != 0 else 0
    h = span / n if n else 0.0
    return n, h


def trace_distance(a, b):
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


@dataclass
class PropagationResult:
    """Checkpointed output of :func:`propagate_state`.

    ``fidelity_vs_target`` is ``|<target(t)|psi(t)>|^2`` (all ones when no
    target was supplied); ``norm_drift`` is ``| ||psi(t)|| - ||psi(t0)|| |``.
    """

    times: np.ndarray
    states: np.ndarray
    fidelity_vs_target: np.ndarray
    norm_drift: np.ndarray
    dt: float

    @property
    def worst_fidelity(self):
        return float(np.min(self.fidelity_vs_target))

    @property
    def final_state(self):
        return self.states[-1]

    def to_csv(self, path):
        rows = np.column_stack([self.times, self.fidelity_vs_target, self.norm_drift])
        np.savetxt(path, rows, delimiter=",", header="t,fidelity,norm_drift", comments="", fmt="%.17g")


@dataclass
class DensityPropagationResult:
    times: np.ndarray
    states: np.ndarray
    trace_distance: np.ndarray
    spectrum_drift: np.ndarray
    purity: np.ndarray
    dt: float

    @property
    def worst_trace_distance(self):
        return float(np.max(self.trace_distance))

    @property
    def final_state(self):
        return self.states[-1]

    def to_csv(self, path):
        rows = np.column_stack([self.times, self.trace_distance, self.spectrum_drift, self.purity])
        np.savetxt(path, rows, delimiter=",", header="t,trace_distance,spectrum_drift,purity", comments="", fmt="%.17g")


def _checkpoint_mask(n, every):
    idx = np.arange(1, n + 1)
    return (idx % every == 0) | (idx == n)


def propagate_state(
    schedule, psi0, t0, t1, dt, target=None, checkpoint_every=1, norm_tol=NORM_TOL, keep_states=True
):
    """Propagate ``psi0`` from ``t0`` to ``t1`` under ``schedule``.

    The step count is ``ceil(|t1 - t0| / dt)``; the actual step is shrunk
    to land on ``t1`` exactly.  ``target(t)`` (optional) supplies the state
    the run is scored against at every checkpoint.  With
    ``keep_states=False`` only the initial and final states are stored
    (useful for large grids).  Raises :class:`IntegratorFailureError` if the
    norm drifts by more than ``norm_tol`` at any step.
    """
    n, h = _step_grid(t0, t1, dt)
    hbar = getattr(schedule, "hbar", 1.0)
    psi = np.array(psi0, dtype=np.complex128)
    sample = schedule(t0 + 0.5 * h)
    grid = sample.grid if isinstance(sample, Rank2Kernel) else None
    if grid is None and sample.shape != (psi.size, psi.size):
        raise ShapeError(f"operator {sample.shape} does not act on state of size {psi.size}")
    weights = grid.weights if grid is not None else None

    def state_norm(states):
        if weights is None:
            return np.sqrt(np.sum(np.abs(states) ** 2, axis=-1))
        return np.sqrt(np.sum(weights * np.abs(states) ** 2, axis=-1))

    def fid(t, state):
        if target is None:
            return 1.0
        ref = target(t)
        if weights is None:
            return abs(np.vdot(ref, state)) ** 2
        return abs(np.sum(weights * ref.conj() * state)) ** 2

    norm0 = state_norm(psi)
    times = [t0]
    states = [psi.copy()]
    fids = [fid(t0, psi)]
    drifts = [0.0]
    keep = _checkpoint_mask(n, checkpoint_every) if n else np.zeros(0, bool)
    constant = getattr(schedule, "constant", False)
    kern = _kernels.get_backend()
    if grid is None and constant:
        unitary = _kernels.step_unitary(np.asarray(sample, dtype=np.complex128) / hbar, h)
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        mids = t0 + (np.arange(start, stop) + 0.5) * h
        if grid is None and constant:
            chunk = kern["repeat_apply"](psi, unitary, stop - start)
        elif grid is None:
            rates = np.array([schedule(t) for t in mids], dtype=np.complex128) / hbar
            chunk = kern["dense_propagate"](psi, rates, h)
        else:
            ops = [sample] * (stop - start) if constant else [schedule(t) for t in mids]
            lefts = np.array([op.left for op in ops], dtype=np.complex128)
            rights = np.array([op.right * (op.scale / hbar) for op in ops], dtype=np.complex128)
            shifts = np.array([op.shift / hbar for op in ops], dtype=float)
            chunk = kern["rank2_propagate"](psi, lefts, rights, shifts, np.asarray(weights), h)
        drift = np.abs(state_norm(chunk) - norm0)
        bad = np.flatnonzero(drift > norm_tol)
        if bad.size:
            j = start + int(bad[0]) + 1
            raise IntegratorFailureError(
                f"norm drift {drift[bad[0]]:.3e} at t={t0 + j * h:.6g}; retry with dt <= {abs(h) / 2:.3g}",
                suggested_dt=abs(h) / 2,
            )
        for j in np.flatnonzero(keep[start:stop]):
            t = t0 + (start + j + 1) * h
            times.append(t)
            if keep_states or start + j + 1 == n:
                states.append(chunk[j])
            fids.append(fid(t, chunk[j]))
            drifts.append(drift[j])
        psi = chunk[-1]
    return PropagationResult(
        times=np.array(times),
        states=np.array(states),
        fidelity_vs_target=np.array(fids),
        norm_drift=np.array(drifts),
        dt=abs(h) if n else dt,
    )


def _check_density(rho, tol=1e-10):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ValueError("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def propagate_density(schedule, rho0, t0, t1, dt, target=None, checkpoint_every=1, tol=SPECTRUM_TOL):
    """Von Neumann evolution ``rho -> U rho U^dagger`` with midpoint steps.

    Trace, Hermiticity and the spectrum are checked at every checkpoint;
    drift beyond ``tol`` raises :class:`IntegratorFailureError`.
    """
    rho0 = np.array(rho0, dtype=np.complex128)
    _check_density(rho0)
    n, h = _step_grid(t0, t1, dt)
    hbar = getattr(schedule, "hbar", 1.0)
    spectrum0 = np.linalg.eigvalsh(rho0)
    kern = _kernels.get_backend()

    def score(t, rho):
        drift = float(np.max(np.abs(np.linalg.eigvalsh(rho) - spectrum0)))
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        tr = abs(np.trace(rho) - 1.0)
        if max(drift, herm, tr) > tol:
            raise IntegratorFailureError(
                f"density drift (spectrum {drift:.2e}, hermiticity {herm:.2e}, trace {tr:.2e}) at t={t:.6g}",
                suggested_dt=abs(h) / 2,
            )
        dist = trace_distance(rho, target(t)) if target is not None else 0.0
        purity = float(np.trace(rho @ rho).real)
        return dist, drift, purity

    times, states, dists, drifts, purities = [t0], [rho0], [], [], []
    for value, bucket in zip(score(t0, rho0), (dists, drifts, purities)):
        bucket.append(value)
    keep = _checkpoint_mask(n, checkpoint_every) if n else np.zeros(0, bool)
    rho = rho0
    for start in range(0, n, CHUNK):
        stop = min(n, start + CHUNK)
        mids = t0 + (np.arange(start, stop) + 0.5) * h
        rates = np.array([schedule(t) for t in mids], dtype=np.complex128) / hbar
        chunk = kern["density_propagate"](rho, rates, h)
        for j in np.flatnonzero(keep[start:stop]):
            t = t0 + (start + j + 1) * h
            times.append(t)
            states.append(chunk[j])
            for value, bucket in zip(score(t, chunk[j]), (dists, drifts, purities)):
                bucket.append(value)
        rho = chunk[-1]
    return DensityPropagationResult(
        times=np.array(times),
        states=np.array(states),
        trace_distance=np.array(dists),
        spectrum_drift=np.array(drifts),
        purity=np.array(purities),
        dt=abs(h) if n else dt,
    )
