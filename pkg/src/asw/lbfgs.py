"""Limited-memory BFGS with Armijo backtracking.

The state is stepped externally so a caller can project the iterate
(e.g. clip pixels) between steps; the curvature pair is formed from the
iterates the caller hands back, so it spans any projection.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

CURVATURE_TOL = 1e-10


@dataclass
class StepResult:
    x: np.ndarray
    value: float
    grad: np.ndarray
    ok: bool
    step_length: float = 0.0
    evaluations: int = 0


@dataclass
class LbfgsState:
    memory: int = 10
    damped: bool = False
    c1: float = 1e-4
    max_backtracks: int = 20
    history: deque = field(default=None)
    prev_x: np.ndarray = None
    prev_grad: np.ndarray = None
    iteration: int = 0
    rejected_in_a_row: int = 0

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be positive")
        if self.history is None:
            self.history = deque(maxlen=self.memory)

    def reset(self):
        """Forget curvature information; the iteration counter survives."""
        self.history.clear()
        self.prev_x = None
        self.prev_grad = None
        self.rejected_in_a_row = 0
        return self

    def _absorb(self, x, grad):
        if self.prev_x is None:
            return
        s = x - self.prev_x
        y = grad - self.prev_grad
        sy = float(np.vdot(s, y))
        if sy > CURVATURE_TOL:
            self.history.append((s, y, 1.0 / sy))
            self.rejected_in_a_row = 0
        else:
            self.rejected_in_a_row += 1
            if self.rejected_in_a_row >= 2:
                self.reset()

    def direction(self, grad):
        """Two-loop recursion: approximate -H^{-1} grad."""
        q = grad.copy()
        alphas = []
        for s, y, rho in reversed(self.history):
            a = rho * np.vdot(s, q)
            q -= a * y
            alphas.append(a)
        if self.history:
            s, y, _ = self.history[-1]
            q *= np.vdot(s, y) / np.vdot(y, y)
        for (s, y, rho), a in zip(self.history, reversed(alphas)):
            b = rho * np.vdot(y, q)
            q += (a - b) * s
        return -q


def lbfgs_step(state, fun, x, value, grad, eta):
    """One quasi-Newton step from ``x``.

    ``fun(x) -> (value, grad)``.  The initial trial length is ``eta`` while
    the history is empty and 1.0 once curvature pairs exist; it is halved
    until the Armijo condition holds.  On exhausting the backtracks the
    input point is returned with ``ok=False``.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != x.shape:
        raise ValueError(f"grad shape {grad.shape} != x shape {x.shape}")
    if not np.isfinite(value):
        raise ValueError("objective value must be finite")

    state._absorb(x, grad)
    state.prev_x, state.prev_grad = x.copy(), grad.copy()
    state.iteration += 1

    if not np.any(grad):
        return StepResult(x.copy(), value, grad.copy(), True)

    d = state.direction(grad)
    slope = float(np.vdot(grad, d))
    if not slope < 0:
        state.reset()
        state.prev_x, state.prev_grad = x.copy(), grad.copy()
        d = -grad
        slope = -float(np.vdot(grad, grad))

    a = 1.0 if state.history and not state.damped else eta
    for n in range(1, state.max_backtracks + 1):
        x_new = x + a * d
        f_new, g_new = fun(x_new)
        if np.isfinite(f_new) and f_new <= value + state.c1 * a * slope:
            return StepResult(x_new, float(f_new), np.asarray(g_new), True, a, n)
        a *= 0.5
    return StepResult(x.copy(), value, grad.copy(), False, 0.0, state.max_backtracks)


def minimize(fun, x0, eta=1.0, iters=100, memory=10, gtol=1e-10):
    """Plain unconstrained driver, mostly for testing the step."""
    state = LbfgsState(memory=memory)
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = fun(x)
    trace = [f]
    for _ in range(iters):
        if np.linalg.norm(g) <= gtol:
            break
        res = lbfgs_step(state, fun, x, f, g, eta)
        if not res.ok:
            break
        x, f, g = res.x, res.value, res.grad
        trace.append(f)
    return x, trace
