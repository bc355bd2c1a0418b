"""Build state trajectories from sampled amplitudes.

The CSV layout is one row per parameter value: ``s, Re a1, Im a1, Re a2,
Im a2, ...``.  A single non-numeric header row and ``#`` comments are
allowed.  Samples are interpolated component-wise with cubic splines and
renormalized on evaluation; derivatives come from central differences of
the interpolated path.
"""

import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from .state import StateTrajectory, norm

MIN_ROWS = 4
WARN_DRIFT = 1e-6
REJECT_DRIFT = 1e-3


class IngestError(ValueError):
    """Sampled trajectory rejected (too short, unordered, or badly normalized)."""


def _has_header(path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                float(line.split(",")[0])
            except ValueError:
                return True
            return False
    return False


def read_samples(path):
    """Return ``(s, amplitudes)`` from a trajectory CSV."""
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=1 if _has_header(path) else 0, ndmin=2)
    if data.shape[1] < 3 or data.shape[1] % 2 != 1:
        raise IngestError(f"{path}: expected columns s, Re a1, Im a1, ... (got {data.shape[1]})")
    return data[:, 0], data[:, 1::2] + 1j * data[:, 2::2]


def trajectory_from_samples(s, amplitudes, grid=None, name="sampled"):
    """Spline-interpolated :class:`StateTrajectory` through the samples.

    Rejects fewer than four rows, a non-monotone ``s`` column and any
    sample whose norm is off by more than ``1e-3``; drift above ``1e-6``
    is renormalized with a warning.
    """
    s = np.asarray(s, dtype=float)
    amps = np.asarray(amplitudes, dtype=np.complex128)
    if s.size < MIN_ROWS:
        raise IngestError(f"{s.size} samples; at least {MIN_ROWS} are needed for a smooth path")
    ds = np.diff(s)
    if not (np.all(ds > 0) or np.all(ds < 0)):
        raise IngestError("s column must be strictly monotone")
    if grid is not None and amps.shape[1] != grid.n_points:
        raise IngestError(f"{amps.shape[1]} amplitudes per row but the grid has {grid.n_points} points")
    norms = np.array([norm(a, grid) for a in amps])
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > REJECT_DRIFT:
        raise IngestError(f"sample norms drift by {drift:.3e} (> {REJECT_DRIFT:g})")
    if drift > WARN_DRIFT:
        warnings.warn(f"sample norms drift by {drift:.3e}; renormalizing", RuntimeWarning, stacklevel=2)
    amps = amps / norms[:, None]
    order = slice(None) if ds[0] > 0 else slice(None, None, -1)
    spline = CubicSpline(s[order], amps[order], axis=0)

    def evaluator(x):
        v = spline(x)
        return v / norm(v, grid)

    return StateTrajectory(evaluator, (float(s[0]), float(s[-1])), grid=grid, name=name)


def load_trajectory_csv(path, grid=None, name=None):
    s, amps = read_samples(path)
    return trajectory_from_samples(s, amps, grid=grid, name=name or str(path))


def write_trajectory_csv(path, s, amplitudes):
    """Inverse of :func:`read_samples` (17 significant digits)."""
    amps = np.asarray(amplitudes, dtype=np.complex128)
    cols = [np.asarray(s, dtype=float)]
    header = ["s"]
    for k in range(amps.shape[1]):
        cols += [amps[:, k].real, amps[:, k].imag]
        header += [f"re{k + 1}", f"im{k + 1}"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def sample_trajectory(traj, n):
    s = np.linspace(*traj.domain, n)
    return s, np.array([traj(x) for x in s])


__all__ = [
    "IngestError",
    "load_trajectory_csv",
    "read_samples",
    "sample_trajectory",
    "trajectory_from_samples",
    "write_trajectory_csv",
]
