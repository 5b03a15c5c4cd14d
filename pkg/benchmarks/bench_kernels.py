#!/usr/bin/env python3
"""Benchmark the numba-compiled kernels against the pure-numpy fallbacks.

Run with the compiled path (default) and compare against
``RELCLOCK_NUMBA=0 python benchmarks/bench_kernels.py`` or rely on this
script, which times both implementations side by side when numba is
available.
"""

import time

import numpy as np

from relclock import _accel


def _time(fn, *args, repeat=5, inner=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_rk4(dim: int, steps: int) -> dict:
    rng = np.random.default_rng(0)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = np.ascontiguousarray(0.5 * (g + g.conj().T))
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    rho = np.ascontiguousarray(rho / rho.trace())

    def loop(stepper):
        r = rho
        for _ in range(steps):
            r = stepper(h, r, 1e-3, 1e-4)
        return r

    out = {"numpy": _time(loop, _accel.rk4_dephasing_step_numpy, repeat=3)}
    if _accel.NUMBA_ENABLED:
        loop(_accel.rk4_dephasing_step_numba)  # compile
        out["numba"] = _time(loop, _accel.rk4_dephasing_step_numba, repeat=3)
    return out


def bench_dephasing(n_spins: int, n_times: int) -> dict:
    g = np.sqrt(np.arange(2, 2 + n_spins, dtype=float))
    c = np.zeros(n_spins)
    t = np.linspace(0.0, 100.0, n_times)
    out = {"numpy": _time(_accel.dephasing_product_numpy, g, c, t)}
    if _accel.NUMBA_ENABLED:
        _accel.dephasing_product_numba(g, c, t)
        out["numba"] = _time(_accel.dephasing_product_numba, g, c, t)
    return out


def bench_sandwich(dim: int, n_times: int) -> dict:
    rng = np.random.default_rng(1)
    pq = rng.normal(size=(n_times, dim, dim)) + 1j * rng.normal(size=(n_times, dim, dim))
    pt = rng.normal(size=(n_times, dim, dim)) + 1j * rng.normal(size=(n_times, dim, dim))
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    rho = np.ascontiguousarray(rho / rho.trace())
    pq = np.ascontiguousarray(pq)
    pt = np.ascontiguousarray(pt)
    out = {"numpy": _time(_accel.sandwich_traces_numpy, pq, pt, rho)}
    if _accel.NUMBA_ENABLED:
        _accel.sandwich_traces_numba(pq, pt, rho)
        out["numba"] = _time(_accel.sandwich_traces_numba, pq, pt, rho)
    return out


def main() -> None:
    print(f"active backend: {_accel.backend_name()}")
    cases = [
        ("rk4 master step, qubit x 20000 steps", bench_rk4(2, 20000)),
        ("rk4 master step, dim 8 x 5000 steps", bench_rk4(8, 5000)),
        ("dephasing product, N=12 x 200k times", bench_dephasing(12, 200_000)),
        ("sandwich traces, dim 128 x 49 times", bench_sandwich(128, 49)),
    ]
    print(f"{'case':45s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, res in cases:
        np_t = res["numpy"]
        if "numba" in res:
            nb_t = res["numba"]
            print(f"{name:45s} {np_t * 1e3:9.2f}ms {nb_t * 1e3:9.2f}ms {np_t / nb_t:7.1f}x")
        else:
            print(f"{name:45s} {np_t * 1e3:9.2f}ms {'-':>10s} {'-':>8s}")


if __name__ == "__main__":
    main()
