"""Minimal-time reparameterization of a parameter path.

For a gauge-fixed path ``psi~(s)`` and an energy-uncertainty budget
``w(s)``, the fastest traversal spends ``dt = ||d_s psi~|| / w(s) |ds|``
on each parameter step.  Budgets are rates, ``Delta H / hbar``, so the
same tables serve any choice of units.  :func:`time_of_param` tabulates the running
integral; :meth:`ReparamTable.invert` turns it back into ``s(t)``; and
:func:`retime` produces the time-indexed gauge-fixed trajectory that the
driving Hamiltonian is built from.
"""

import json
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._quad import midpoints, simpson_cumulative
from .driving import mixed_variance
from .errors import BudgetError, GaugeResidualError, RangeError
from .gauge import GaugeFixedTrajectory
from .state import StateTrajectory

GAUGE_TOL = 1e-6


def _budget_fn(budget_profile):
    if callable(budget_profile):
        return budget_profile
    if hasattr(budget_profile, "omega_max"):
        value = float(budget_profile.omega_max)
    else:
        value = float(budget_profile)
    return lambda s: value


def _limit_slopes(t, u, slopes):
    """Fritsch-Carlson limiter: keeps the Hermite interpolant monotone.

    Slopes that already satisfy the monotonicity region are left exact, so
    smooth data keeps fourth-order accuracy.
    """
    m = np.array(slopes, dtype=float)
    delta = np.diff(t) / np.diff(u)
    for k, dk in enumerate(delta):
        if dk <= 0.0:
            m[k] = m[k + 1] = 0.0
            continue
        a, b = m[k] / dk, m[k + 1] / dk
        r = a * a + b * b
        if r > 9.0:
            tau = 3.0 / np.sqrt(r)
            m[k] = tau * a * dk
            m[k + 1] = tau * b * dk
    return m


@dataclass(frozen=True)
class ReparamTable:
    """Sampled monotone relation between parameter ``s`` and time ``t``.

    ``s_samples`` runs from ``s0`` to ``s1`` (either direction);
    ``t_samples`` starts at 0 and never decreases.  ``slopes`` holds
    ``dt/d|s - s0|`` at the nodes; when absent (e.g. after reading a CSV) a
    monotone PCHIP estimate is used.
    """

    s_samples: np.ndarray
    t_samples: np.ndarray
    budget_samples: np.ndarray
    slopes: np.ndarray = None

    def __post_init__(self):
        s = np.asarray(self.s_samples, dtype=float)
        t = np.asarray(self.t_samples, dtype=float)
        if s.shape != t.shape or s.size < 2:
            raise ValueError("s and t samples must be equal-length arrays of at least 2 points")
        if t[0] != 0.0 or np.any(np.diff(t) < 0):
            raise ValueError("t samples must start at 0 and be nondecreasing")
        ds = np.diff(s)
        if not (np.all(ds > 0) or np.all(ds < 0)):
            raise ValueError("s samples must be strictly monotone")
        u = np.abs(s - s[0])
        if self.slopes is None:
            slopes = PchipInterpolator(u, t).derivative()(u)
        else:
            slopes = np.asarray(self.slopes, dtype=float)
        for name, value in (("s_samples", s), ("t_samples", t), ("budget_samples", np.asarray(self.budget_samples, dtype=float))):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "_u", u)
        object.__setattr__(self, "_m", _limit_slopes(t, u, slopes))

    @property
    def s0(self):
        return float(self.s_samples[0])

    @property
    def s1(self):
        return float(self.s_samples[-1])

    @property
    def t_total(self):
        return float(self.t_samples[-1])

    @property
    def direction(self):
        return 1.0 if self.s1 >= self.s0 else -1.0

    def _segment(self, k, u, derivative=False):
        u0, u1 = self._u[k], self._u[k + 1]
        h = u1 - u0
        x = (u - u0) / h
        t0, t1 = self.t_samples[k], self.t_samples[k + 1]
        m0, m1 = self._m[k] * h, self._m[k + 1] * h
        if derivative:
            d00 = 6 * x * x - 6 * x
            d10 = 3 * x * x - 4 * x + 1
            d11 = 3 * x * x - 2 * x
            return (d00 * (t0 - t1) + d10 * m0 + d11 * m1) / h
        h00 = (1 + 2 * x) * (1 - x) ** 2
        h10 = x * (1 - x) ** 2
        h01 = x * x * (3 - 2 * x)
        h11 = x * x * (x - 1)
        return h00 * t0 + h10 * m0 + h01 * t1 + h11 * m1

    def t_of(self, s):
        """Interpolated time at parameter ``s`` (cubic Hermite)."""
        s = np.asarray(s, dtype=float)
        u = np.abs(s - self.s0)
        k = np.clip(np.searchsorted(self._u, u, side="right") - 1, 0, self._u.size - 2)
        out = self._segment(k, u)
        return float(out) if out.ndim == 0 else out

    def invert(self, t):
        """Parameter ``s`` reached at time ``t``.

        Inverts the monotone Hermite interpolant segment by segment with a
        bracketed Newton iteration (bisection whenever a Newton step leaves
        the bracket), so ``t_of(invert(t))`` reproduces ``t`` to rounding.
        On stalled (zero-duration) stretches the earliest ``s`` is returned.
        """
        if np.ndim(t) == 0:
            return self._invert_scalar(float(t))
        t = np.asarray(t, dtype=float)
        t = np.atleast_1d(t)
        t_max = self.t_total
        slack = 1e-12 * max(t_max, 1.0)
        if np.any(t < -slack) or np.any(t > t_max + slack):
            raise RangeError(f"t outside [0, {t_max}]")
        t = np.clip(t, 0.0, t_max)
        ts = self.t_samples
        k = np.clip(np.searchsorted(ts, t, side="left") - 1, 0, ts.size - 2)
        lo = self._u[k].copy()
        hi = self._u[k + 1].copy()
        on_node = t <= ts[k]
        span = ts[k + 1] - ts[k]
        frac = np.divide(t - ts[k], span, out=np.zeros_like(t), where=span > 0)
        u = lo + frac * (hi - lo)
        tol = 4.0 * np.finfo(float).eps * np.maximum(np.abs(hi), 1.0)
        for _ in range(100):
            f = self._segment(k, u) - t
            lo = np.where(f < 0, u, lo)
            hi = np.where(f < 0, hi, u)
            slope = self._segment(k, u, derivative=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(slope > 0, u - f / slope, np.nan)
            bisect = ~((step > lo) & (step < hi))
            new = np.where(bisect, 0.5 * (lo + hi), step)
            done = (np.abs(new - u) <= tol) | (hi - lo <= tol)
            u = new
            if np.all(done):
                break
        u = np.where(on_node, self._u[k], u)
        return self.s0 + self.direction * u

    def _invert_scalar(self, t):
        # same iteration as invert() on plain floats; the propagator calls this per step
        t_max = self.t_total
        if t < -1e-12 * max(t_max, 1.0) or t > t_max + 1e-12 * max(t_max, 1.0):
            raise RangeError(f"t outside [0, {t_max}]")
        t = min(max(t, 0.0), t_max)
        ts = self.t_samples
        k = min(max(int(np.searchsorted(ts, t, side="left")) - 1, 0), ts.size - 2)
        lo, hi = float(self._u[k]), float(self._u[k + 1])
        t0, t1 = float(ts[k]), float(ts[k + 1])
        if t <= t0:
            return self.s0 + self.direction * lo
        h = hi - lo
        m0, m1 = float(self._m[k]) * h, float(self._m[k + 1]) * h
        base = lo
        tol = 4.0 * np.finfo(float).eps * max(abs(hi), 1.0)
        u = lo + (t - t0) / (t1 - t0) * h if t1 > t0 else lo
        for _ in range(100):
            x = (u - base) / h
            f = (1 + 2 * x) * (1 - x) ** 2 * t0 + x * (1 - x) ** 2 * m0 + x * x * (3 - 2 * x) * t1 + x * x * (x - 1) * m1 - t
            if f < 0:
                lo = u
            else:
                hi = u
            slope = ((6 * x * x - 6 * x) * (t0 - t1) + (3 * x * x - 4 * x + 1) * m0 + (3 * x * x - 2 * x) * m1) / h
            step = u - f / slope if slope > 0 else math.nan
            new = step if lo < step < hi else 0.5 * (lo + hi)
            done = abs(new - u) <= tol or hi - lo <= tol
            u = new
            if done:
                break
        return self.s0 + self.direction * u

    def to_csv(self, path):
        header = {
            "budget_profile": [float(x) for x in self.budget_samples],
            "s0": self.s0,
            "s1": self.s1,
            "t_total": self.t_total,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(header) + "\n")
            fh.write("s,t\n")
            for s, t in zip(self.s_samples, self.t_samples):
                fh.write(f"{s:.17g},{t:.17g}\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise ValueError(f"{path}: missing JSON header line")
            header = json.loads(first[2:])
            data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], np.asarray(header["budget_profile"], dtype=float))


def _lattice(domain, s0, s1, n_steps, lattice):
    if lattice is not None:
        nodes = np.asarray(lattice, dtype=float)
    else:
        s0 = domain[0] if s0 is None else s0
        s1 = domain[1] if s1 is None else s1
        nodes = np.linspace(s0, s1, n_steps + 1)
    return nodes


def _tabulate(nodes, integrand, budget):
    w_nodes = np.array([budget(s) for s in nodes])
    w_mids = np.array([budget(s) for s in midpoints(nodes)])
    if np.any(w_nodes <= 0) or np.any(w_mids <= 0):
        raise BudgetError("budget must be positive along the whole path")
    f_nodes = np.array([integrand(s) for s in nodes]) / w_nodes
    f_mids = np.array([integrand(s) for s in midpoints(nodes)]) / w_mids
    u = np.abs(nodes - nodes[0])
    t = simpson_cumulative(u, f_nodes, f_mids)
    if np.any(np.diff(t) < 0):
        warnings.warn("cumulative time not monotone; clipping numerical noise", RuntimeWarning, stacklevel=3)
        t = np.maximum.accumulate(t)
    return ReparamTable(nodes, t, w_nodes, slopes=f_nodes)


def time_of_param(gtraj, budget_profile, s0=None, s1=None, n_steps=2048, lattice=None):
    """Minimal driving time along ``gtraj`` from ``s0`` to ``s1``.

    ``budget_profile`` is a constant, a :class:`ResourceBudget`, or a
    callable ``s -> w(s)``.  The path speed is the plain norm for discrete
    states and the trapezoid-rule norm for grid wavefunctions.  A custom
    monotone ``lattice`` (e.g. graded toward a sharp feature) replaces the
    uniform one.
    """
    budget = _budget_fn(budget_profile)
    nodes = _lattice(gtraj.domain, s0, s1, n_steps, lattice)

    def speed(s):
        d = gtraj.derivative(s)
        resid = abs(gtraj.inner(d, gtraj(s)))
        if resid > GAUGE_TOL:
            raise GaugeResidualError(f"trajectory not gauge-fixed at s={s} (residual {resid:.3e})", resid)
        return gtraj.norm(d)

    return _tabulate(nodes, speed, budget)


def time_of_param_mixed(dtraj, budget_profile, s0=None, s1=None, n_steps=2048, lattice=None):
    """Minimal driving time for a density-matrix path with fixed weights."""
    budget = _budget_fn(budget_profile)
    nodes = _lattice(dtraj.domain, s0, s1, n_steps, lattice)
    return _tabulate(nodes, lambda s: np.sqrt(mixed_variance(dtraj, s)), budget)


def retime(gtraj, table, budget_profile, name=""):
    """Time-indexed version of ``gtraj`` that saturates the budget.

    Returns a :class:`GaugeFixedTrajectory` on ``[0, table.t_total]`` with
    ``psi~(s(t))`` and chain-rule derivatives.  ``ds/dt`` is evaluated from
    the budget and path speed at ``s(t)`` directly rather than from the
    interpolant, so the energy variance equals ``w(s(t))^2`` to the
    accuracy of the path derivative.
    """
    budget = _budget_fn(budget_profile)
    sign = table.direction
    base = gtraj.base if getattr(gtraj, "base", None) is not None else gtraj

    @lru_cache(maxsize=64)
    def s_of(t):
        return table.invert(t)

    def sdot(s):
        speed = gtraj.norm(gtraj.derivative(s))
        return sign * budget(s) / speed if speed > 0 else 0.0

    def rate(t):
        s = s_of(t)
        if not hasattr(gtraj, "phase_rate"):
            return 0.0
        return gtraj.phase_rate(s) * sdot(s)

    def phase(t):
        return gtraj.phase(s_of(t)) if hasattr(gtraj, "phase") else 0.0

    def evaluator(t):
        return gtraj(s_of(t))

    def derivative_fn(t):
        s = s_of(t)
        return gtraj.derivative(s) * sdot(s)

    def base_eval(t):
        return base(s_of(t))

    def base_derivative(t):
        s = s_of(t)
        return base.derivative(s) * sdot(s)

    domain = (0.0, table.t_total)
    base_t = StateTrajectory(base_eval, domain, derivative_fn=base_derivative, grid=gtraj.grid)
    return GaugeFixedTrajectory(
        evaluator=evaluator,
        domain=domain,
        derivative_fn=derivative_fn,
        grid=gtraj.grid,
        name=name or gtraj.name,
        base=base_t,
        phase_fn=phase,
        rate_fn=rate,
    )
