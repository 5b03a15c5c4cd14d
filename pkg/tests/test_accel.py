"""The compiled kernels and the pure-numpy fallbacks must agree bitwise-close.

Running the suite with RELCLOCK_NUMBA=0 exercises the fallback path end to end.
"""

import numpy as np
import pytest

from relclock import _accel

import oracles


@pytest.fixture(scope="module")
def problem(rng=None):
    rng = np.random.default_rng(99)
    h = oracles.random_hermitian(rng, 4)
    rho = oracles.random_density(rng, 4)
    return np.ascontiguousarray(h), np.ascontiguousarray(rho)


def test_active_backend_matches_numpy_rk4(problem):
    h, rho = problem
    a = _accel.rk4_dephasing_step(h, rho, 1e-3, 2e-4)
    b = _accel.rk4_dephasing_step_numpy(h, rho, 1e-3, 2e-4)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_active_backend_matches_numpy_dephasing():
    g = np.sqrt(np.array([2.0, 3.0, 5.0, 7.0]))
    c = np.array([0.0, 0.3, -0.5, 1.0])
    t = np.linspace(0.0, 20.0, 2001)
    a = _accel.dephasing_product(g, c, t)
    b = _accel.dephasing_product_numpy(g, c, t)
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_active_backend_matches_numpy_sandwich():
    rng = np.random.default_rng(3)
    nt, d = 7, 6
    pq = np.ascontiguousarray(rng.normal(size=(nt, d, d)) + 1j * rng.normal(size=(nt, d, d)))
    pt = np.ascontiguousarray(rng.normal(size=(nt, d, d)) + 1j * rng.normal(size=(nt, d, d)))
    rho = np.ascontiguousarray(oracles.random_density(rng, d))
    num_a, den_a = _accel.sandwich_traces(pq, pt, rho)
    num_b, den_b = _accel.sandwich_traces_numpy(pq, pt, rho)
    np.testing.assert_allclose(num_a, num_b, atol=1e-12)
    np.testing.assert_allclose(den_a, den_b, atol=1e-12)


def test_rk4_step_agrees_with_scalar_exponential(problem):
    # one linear-dephasing step on a diagonal Hamiltonian has a closed form
    h = np.diag([1.0, -1.0]).astype(complex)
    rho = np.array([[0.5, 0.3], [0.3, 0.5]], dtype=complex)
    dt, rate = 1e-3, 0.05
    out = _accel.rk4_dephasing_step(h, rho, dt, rate)
    lam = -2j - rate * 4.0
    want01 = 0.3 * np.exp(lam * dt)
    assert abs(out[0, 1] - want01) <= 1e-12


def test_backend_name_reports_mode():
    assert _accel.backend_name() in ("numba", "numpy")
    assert _accel.NUMBA_ENABLED == (_accel.backend_name() == "numba")
