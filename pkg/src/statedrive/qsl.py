"""Quantum speed limits for fixed endpoints and a continuum counterexample.

The Mandelstam-Tamm bound ``hbar * arccos|<i|f>| / Delta E`` and the
Margolus-Levitin bound ``hbar * arccos|<i|f>| / (<H> - E_ground)`` are
evaluated in the initial state; the speed limit is the larger of the two.
Both depend on the endpoints only through the overlap angle, which
saturates at ``pi / 2`` for any pair of non-overlapping packets.
:func:`translation_time` shows the contrast: the minimal driving time along
an explicit path keeps growing with the distance travelled.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .driving import _check_hermitian
from .gauge import trivially_fixed
from .reparam import time_of_param
from .state import Grid, StateTrajectory, inner, norm

NORM_TOL = 1e-10


def overlap_angle(a, b, grid=None):
    """``arccos|<a|b>|`` evaluated as an ``atan2`` to stay exact near 0."""
    ov = inner(a, b, grid)
    perp = norm(b - ov * a, grid)
    return float(math.atan2(perp, abs(ov))), float(min(abs(ov), 1.0))


@dataclass(frozen=True)
class QslReport:
    """Speed-limit bounds for one Hamiltonian and endpoint pair.

    ``mean_excess_e`` is ``<H> - E_ground``.  A bound whose denominator
    vanishes (while the endpoints differ) is ``inf`` and ``bounded`` is
    False.
    """

    mt_bound: float
    ml_bound: float
    tau_qsl: float
    delta_e: float
    mean_excess_e: float
    angle: float
    bounded: bool

    def to_dict(self):
        return asdict(self)


def _bound(hbar, angle, denominator, scale):
    if angle == 0.0:
        return 0.0
    if denominator <= 1e-14 * scale:
        return math.inf
    return hbar * angle / denominator


def qsl_bounds(h, psi_i, psi_f, hbar=1.0):
    """Mandelstam-Tamm and Margolus-Levitin bounds for a constant ``h``.

    Expectation values are taken in ``psi_i``; ``Delta E`` is the standard
    deviation ``sqrt(<H^2> - <H>^2)``.  Identical endpoints give zero for
    both bounds regardless of ``h``.
    """
    h = _check_hermitian(np.asarray(h, dtype=np.complex128))
    psi_i = np.asarray(psi_i, dtype=np.complex128)
    psi_f = np.asarray(psi_f, dtype=np.complex128)
    for name, v in (("psi_i", psi_i), ("psi_f", psi_f)):
        if abs(norm(v) - 1.0) > NORM_TOL:
            raise ValueError(f"{name} is not normalized")
    angle, _ = overlap_angle(psi_i, psi_f)
    h_psi = h @ psi_i
    mean = inner(psi_i, h_psi).real
    variance = max(norm(h_psi) ** 2 - mean**2, 0.0)
    delta_e = math.sqrt(variance)
    e_ground = float(np.linalg.eigvalsh(h)[0])
    excess = max(mean - e_ground, 0.0)
    scale = max(1.0, float(np.max(np.abs(h))))
    mt = _bound(hbar, angle, delta_e, scale)
    ml = _bound(hbar, angle, excess, scale)
    tau = max(mt, ml)
    return QslReport(
        mt_bound=mt,
        ml_bound=ml,
        tau_qsl=tau,
        delta_e=delta_e,
        mean_excess_e=excess,
        angle=angle,
        bounded=math.isfinite(tau),
    )


# ------------------------------------------------------------ continuum demo


@dataclass(frozen=True)
class OverlapReport:
    overlap: float
    angle: float

    def to_dict(self):
        return asdict(self)


def continuum_separation_demo(psi_i, psi_f, grid=None):
    """Overlap ``|<f|i>|`` and its angle ``arccos`` for two sampled packets.

    The angle is all a fixed-endpoint bound sees; it is capped at
    ``pi / 2``, so it cannot tell a short hop from a long journey.
    """
    angle, overlap = overlap_angle(psi_i, psi_f, grid)
    return OverlapReport(overlap=overlap, angle=angle)


def gaussian_packet(z, center, sigma):
    """Normalized real Gaussian ``(pi sigma^2)^(-1/4) exp(-(z - c)^2 / (2 sigma^2))``."""
    return (math.pi * sigma * sigma) ** -0.25 * np.exp(-((z - center) ** 2) / (2.0 * sigma * sigma))


def gaussian_overlap(d, sigma_a, sigma_b=None):
    """Closed-form ``<a|b>`` of two such packets with centers ``d`` apart."""
    sigma_b = sigma_a if sigma_b is None else sigma_b
    s2 = sigma_a**2 + sigma_b**2
    return math.sqrt(2.0 * sigma_a * sigma_b / s2) * math.exp(-(d * d) / (2.0 * s2))


def translation_path(grid, sigma, distance, start=0.0):
    """Packet translated rigidly from ``start`` to ``start + distance``."""
    z = grid.z

    def evaluator(x):
        return gaussian_packet(z, start + x, sigma)

    def derivative_fn(x):
        y = z - start - x
        return gaussian_packet(z, start + x, sigma) * y / (sigma * sigma)

    return StateTrajectory(evaluator, (0.0, distance), derivative_fn=derivative_fn, grid=grid, name="translation")


def translation_time(grid, sigma, distance, budget, start=0.0, n_steps=256):
    """Minimal time to translate the packet by ``distance`` under ``budget``.

    A rigid shift of a real packet is already parallel transported, and
    its speed is the constant ``1 / (sqrt(2) sigma)``, so the exact answer
    is ``distance / (sqrt(2) sigma budget)``.
    """
    path = trivially_fixed(translation_path(grid, sigma, distance, start))
    return time_of_param(path, budget, n_steps=n_steps).t_total


def demo_grid(sigma, max_distance, n_points=8192, pad=12.0):
    return Grid(-pad * sigma, max_distance + pad * sigma, n_points)
