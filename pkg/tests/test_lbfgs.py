import numpy as np
import pytest
from scipy.optimize import minimize as sp_minimize, rosen, rosen_der

from asw.lbfgs import LbfgsState, lbfgs_step, minimize


def quad(a, b):
    return lambda x: (0.5 * x @ a @ x - b @ x, a @ x - b)


def test_two_loop_matches_dense_bfgs(rng):
    # explicit inverse-Hessian recursion as the oracle
    n = 6
    st = LbfgsState(memory=10)
    pairs = []
    for _ in range(4):
        s = rng.normal(size=n)
        y = s + 0.1 * rng.normal(size=n)
        if s @ y > 0:
            pairs.append((s, y))
            st.history.append((s, y, 1 / (s @ y)))
    s, y = pairs[-1]
    h = np.eye(n) * (s @ y) / (y @ y)
    for s, y in pairs:
        rho = 1 / (s @ y)
        v = np.eye(n) - rho * np.outer(y, s)
        h = v.T @ h @ v + rho * np.outer(s, s)
    g = rng.normal(size=n)
    np.testing.assert_allclose(st.direction(g), -h @ g, rtol=1e-10)


def test_quadratic_converges(rng):
    m = rng.normal(size=(8, 8))
    a = m @ m.T + 8 * np.eye(8)
    b = rng.normal(size=8)
    x, trace = minimize(quad(a, b), np.zeros(8), iters=60)
    np.testing.assert_allclose(x, np.linalg.solve(a, b), atol=1e-7)
    assert all(t1 <= t0 + 1e-12 for t0, t1 in zip(trace, trace[1:]))


def test_rosenbrock_agrees_with_scipy():
    f = lambda x: (rosen(x), rosen_der(x))
    x0 = np.array([-1.2, 1.0, -0.5, 0.8])
    x, _ = minimize(f, x0, iters=500)
    ref = sp_minimize(rosen, x0, jac=rosen_der, method="L-BFGS-B").x
    np.testing.assert_allclose(x, ref, atol=1e-4)


def test_damped_step_length_and_armijo():
    f = quad(np.eye(3), np.zeros(3))
    st = LbfgsState(damped=True)
    x = np.ones(3)
    v, g = f(x)
    r = lbfgs_step(st, f, x, v, g, 0.05)
    assert r.ok and r.step_length == 0.05
    np.testing.assert_allclose(r.x, 0.95 * x)
    # a huge trial length must be cut back until the loss decreases
    st = LbfgsState(damped=True)
    r = lbfgs_step(st, f, x, v, g, 100.0)
    assert r.ok and r.value < v and r.step_length < 100


def test_zero_gradient_and_validation():
    f = quad(np.eye(2), np.zeros(2))
    r = lbfgs_step(LbfgsState(), f, np.zeros(2), 0.0, np.zeros(2), 1.0)
    assert r.ok and np.all(r.x == 0)
    with pytest.raises(ValueError):
        LbfgsState(memory=0)
    with pytest.raises(ValueError):
        lbfgs_step(LbfgsState(), f, np.zeros(2), np.nan, np.zeros(2), 1.0)
