"""Time-stepping kernels with a numba path and a pure-numpy fallback.

Both paths implement the same midpoint exponential steps.  The numba path
is used when numba imports and ``STATEDRIVE_DISABLE_NUMBA`` is unset (or
``0``); set the variable to ``1`` to force the numpy path.  Both variants
stay importable through :func:`get_backend` so tests and the benchmark can
compare them directly.

Conventions shared by all kernels: ``rates`` are Hamiltonians already
divided by hbar, and step ``j`` maps the state at ``t0 + j*dt`` to
``t0 + (j+1)*dt`` with ``exp(-1j * rates[j] * dt)``.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disabled():
    return os.environ.get("STATEDRIVE_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


# ---------------------------------------------------------------- numpy path


def _dense_propagate_np(psi0, rates, dt):
    w, v = np.linalg.eigh(rates)
    phases = np.exp(-1j * w * dt)
    # U_j = V_j diag(phases_j) V_j^dagger, built for the whole chunk at once
    unitaries = np.einsum("kij,kj,klj->kil", v, phases, v.conj())
    out = np.empty((rates.shape[0], psi0.shape[0]), dtype=np.complex128)
    psi = psi0.astype(np.complex128)
    for j in range(rates.shape[0]):
        psi = unitaries[j] @ psi
        out[j] = psi
    return out


def _repeat_apply_np(psi0, unitary, steps):
    out = np.empty((steps, psi0.shape[0]), dtype=np.complex128)
    psi = psi0.astype(np.complex128)
    for j in range(steps):
        psi = unitary @ psi
        out[j] = psi
    return out


def _density_propagate_np(rho0, rates, dt):
    w, v = np.linalg.eigh(rates)
    phases = np.exp(-1j * w * dt)
    unitaries = np.einsum("kij,kj,klj->kil", v, phases, v.conj())
    out = np.empty((rates.shape[0],) + rho0.shape, dtype=np.complex128)
    rho = rho0.astype(np.complex128)
    for j in range(rates.shape[0]):
        u = unitaries[j]
        rho = u @ rho @ u.conj().T
        out[j] = rho
    return out


def _su2_exp(m11, m12, m22, tau):
    """Entries of exp(-1j*M*tau) for a Hermitian 2x2 matrix M."""
    a0 = 0.5 * (m11 + m22)
    az = 0.5 * (m11 - m22)
    ax = m12.real
    ay = -m12.imag
    r = np.sqrt(ax * ax + ay * ay + az * az)
    c = np.cos(r * tau)
    sinc = tau if r == 0.0 else np.sin(r * tau) / r
    g = np.exp(-1j * a0 * tau)
    u11 = g * (c - 1j * sinc * az)
    u22 = g * (c + 1j * sinc * az)
    u12 = g * (-1j * sinc * (ax - 1j * ay))
    u21 = g * (-1j * sinc * (ax + 1j * ay))
    return u11, u12, u21, u22


def _rank2_propagate_np(phi0, lefts, rights, shifts, weights, dt):
    out = np.empty((lefts.shape[0], phi0.shape[0]), dtype=np.complex128)
    phi = phi0.astype(np.complex128)
    for j in range(lefts.shape[0]):
        psi = lefts[j]
        d = rights[j]
        p = np.sqrt(np.sum(weights * np.abs(psi) ** 2))
        e1 = psi / p
        alpha = np.sum(weights * e1.conj() * d)
        d_perp = d - alpha * e1
        beta = np.sqrt(np.sum(weights * np.abs(d_perp) ** 2))
        e2 = d_perp / beta if beta > 0.0 else np.zeros_like(d_perp)
        # generator i(|d><psi| - |psi><d|) in the orthonormal pair (e1, e2)
        m11 = -2.0 * p * alpha.imag
        m12 = -1j * p * beta
        u11, u12, u21, u22 = _su2_exp(m11, m12, 0.0, dt)
        a1 = np.sum(weights * e1.conj() * phi)
        a2 = np.sum(weights * e2.conj() * phi)
        rest = phi - a1 * e1 - a2 * e2
        phi = np.exp(-1j * shifts[j] * dt) * (
            rest + (u11 * a1 + u12 * a2) * e1 + (u21 * a1 + u22 * a2) * e2
        )
        out[j] = phi
    return out


# ---------------------------------------------------------------- numba path

if numba is not None:

    @numba.njit(cache=True)
    def _dense_propagate_nb(psi0, rates, dt):
        k = rates.shape[0]
        n = psi0.shape[0]
        out = np.empty((k, n), dtype=np.complex128)
        psi = psi0.astype(np.complex128)
        tmp = np.empty(n, dtype=np.complex128)
        for j in range(k):
            w, v = np.linalg.eigh(rates[j])
            for a in range(n):
                acc = 0.0j
                for b in range(n):
                    acc += np.conj(v[b, a]) * psi[b]
                tmp[a] = acc * np.exp(-1j * w[a] * dt)
            for b in range(n):
                acc = 0.0j
                for a in range(n):
                    acc += v[b, a] * tmp[a]
                psi[b] = acc
            out[j] = psi
        return out

    @numba.njit(cache=True)
    def _repeat_apply_nb(psi0, unitary, steps):
        n = psi0.shape[0]
        out = np.empty((steps, n), dtype=np.complex128)
        psi = psi0.astype(np.complex128)
        tmp = np.empty(n, dtype=np.complex128)
        for j in range(steps):
            for a in range(n):
                acc = 0.0j
                for b in range(n):
                    acc += unitary[a, b] * psi[b]
                tmp[a] = acc
            psi[:] = tmp
            out[j] = psi
        return out

    @numba.njit(cache=True)
    def _density_propagate_nb(rho0, rates, dt):
        k = rates.shape[0]
        n = rho0.shape[0]
        out = np.empty((k, n, n), dtype=np.complex128)
        rho = rho0.astype(np.complex128)
        for j in range(k):
            w, v = np.linalg.eigh(rates[j])
            u = np.empty((n, n), dtype=np.complex128)
            for a in range(n):
                ph = np.exp(-1j * w[a] * dt)
                for b in range(n):
                    u[b, a] = v[b, a] * ph
            u = u @ v.conj().T
            rho = u @ rho @ u.conj().T
            out[j] = rho
        return out

    @numba.njit(cache=True)
    def _rank2_propagate_nb(phi0, lefts, rights, shifts, weights, dt):
        k = lefts.shape[0]
        n = phi0.shape[0]
        out = np.empty((k, n), dtype=np.complex128)
        phi = phi0.astype(np.complex128)
        e1 = np.empty(n, dtype=np.complex128)
        e2 = np.empty(n, dtype=np.complex128)
        for j in range(k):
            pp = 0.0
            for i in range(n):
                x = lefts[j, i]
                pp += weights[i] * (x.real * x.real + x.imag * x.imag)
            p = np.sqrt(pp)
            alpha = 0.0j
            for i in range(n):
                e1[i] = lefts[j, i] / p
                alpha += weights[i] * np.conj(e1[i]) * rights[j, i]
            bb = 0.0
            for i in range(n):
                e2[i] = rights[j, i] - alpha * e1[i]
                bb += weights[i] * (e2[i].real * e2[i].real + e2[i].imag * e2[i].imag)
            beta = np.sqrt(bb)
            for i in range(n):
                e2[i] = e2[i] / beta if beta > 0.0 else 0.0j
            m11 = -2.0 * p * alpha.imag
            # m12 = -1j * p * beta, so its real part is 0 and imag part is -p*beta
            az = 0.5 * m11
            ay = p * beta
            r = np.sqrt(ay * ay + az * az)
            c = np.cos(r * dt)
            sinc = dt if r == 0.0 else np.sin(r * dt) / r
            g = np.exp(-1j * 0.5 * m11 * dt)
            u11 = g * (c - 1j * sinc * az)
            u22 = g * (c + 1j * sinc * az)
            u12 = g * (-1j * sinc * (-1j * ay))
            u21 = g * (-1j * sinc * (1j * ay))
            a1 = 0.0j
            a2 = 0.0j
            for i in range(n):
                a1 += weights[i] * np.conj(e1[i]) * phi[i]
                a2 += weights[i] * np.conj(e2[i]) * phi[i]
            b1 = u11 * a1 + u12 * a2
            b2 = u21 * a1 + u22 * a2
            ph = np.exp(-1j * shifts[j] * dt)
            for i in range(n):
                phi[i] = ph * (phi[i] + (b1 - a1) * e1[i] + (b2 - a2) * e2[i])
            out[j] = phi
        return out


_NUMPY = {
    "dense_propagate": _dense_propagate_np,
    "repeat_apply": _repeat_apply_np,
    "density_propagate": _density_propagate_np,
    "rank2_propagate": _rank2_propagate_np,
}

if numba is not None:
    _NUMBA = {
        "dense_propagate": _dense_propagate_nb,
        "repeat_apply": _repeat_apply_nb,
        "density_propagate": _density_propagate_nb,
        "rank2_propagate": _rank2_propagate_nb,
    }
else:  # pragma: no cover
    _NUMBA = None

NUMBA_AVAILABLE = _NUMBA is not None
BACKEND = "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"


def get_backend(name=None):
    """Return the kernel table for ``name`` ('numba' or 'numpy').

    ``None`` selects the active backend chosen at import time.
    """
    name = BACKEND if name is None else name
    if name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _NUMBA
    if name == "numpy":
        return _NUMPY
    raise ValueError(f"unknown kernel backend {name!r}")


def dense_propagate(psi0, rates, dt):
    return get_backend()["dense_propagate"](psi0, rates, dt)


def repeat_apply(psi0, unitary, steps):
    return get_backend()["repeat_apply"](psi0, unitary, steps)


def step_unitary(rate, dt):
    """``exp(-1j * rate * dt)`` for one Hermitian ``rate`` matrix."""
    w, v = np.linalg.eigh(rate)
    return (v * np.exp(-1j * w * dt)) @ v.conj().T


def density_propagate(rho0, rates, dt):
    return get_backend()["density_propagate"](rho0, rates, dt)


def rank2_propagate(phi0, lefts, rights, shifts, weights, dt):
    return get_backend()["rank2_propagate"](phi0, lefts, rights, shifts, weights, dt)
