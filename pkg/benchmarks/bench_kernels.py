"""Wall-clock comparison of the numba and numpy stepping kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeats 5] [--steps 20000]

Each kernel is run once per backend to warm up (numba compiles on the
first call), then timed ``--repeats`` times; the best time is reported
together with the largest difference between the two backends' outputs.
"""

import argparse
import time

import numpy as np

from statedrive._kernels import NUMBA_AVAILABLE, get_backend, step_unitary


def _hermitian(rng, k, n):
    a = rng.normal(size=(k, n, n)) + 1j * rng.normal(size=(k, n, n))
    return 0.5 * (a + np.conj(np.swapaxes(a, 1, 2)))


def _cases(steps, rng):
    dt = 1e-3
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    rates = _hermitian(rng, steps, 4)
    rho = np.outer(psi, psi.conj())
    unitary = step_unitary(rates[0], dt)
    n = 256
    lefts = rng.normal(size=(steps // 10, n)) + 1j * rng.normal(size=(steps // 10, n))
    rights = rng.normal(size=(steps // 10, n)) + 1j * rng.normal(size=(steps // 10, n))
    weights = np.full(n, 1.0 / n)
    phi = lefts[0] / np.sqrt(np.sum(weights * np.abs(lefts[0]) ** 2))
    return {
        "dense_propagate (d=4)": ("dense_propagate", (psi, rates, dt)),
        "repeat_apply (d=4)": ("repeat_apply", (psi, unitary, steps)),
        "density_propagate (d=4)": ("density_propagate", (rho, rates, dt)),
        f"rank2_propagate (n={n})": ("rank2_propagate", (phi, lefts, rights, np.zeros(steps // 10), weights, dt)),
    }


def _best(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--steps", type=int, default=20000)
    args = parser.parse_args(argv)
    if not NUMBA_AVAILABLE:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    nb, nps = get_backend("numba"), get_backend("numpy")
    print(f"{'kernel':28s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max diff':>9s}")
    for label, (key, call) in _cases(args.steps, rng).items():
        nb[key](*call)  # compile
        t_np, out_np = _best(nps[key], call, args.repeats)
        t_nb, out_nb = _best(nb[key], call, args.repeats)
        diff = float(np.max(np.abs(out_np - out_nb)))
        print(f"{label:28s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
