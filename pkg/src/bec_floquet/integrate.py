"""Classical fixed-step fourth-order Runge-Kutta."""

from __future__ import annotations

import numpy as np


class NumericalError(RuntimeError):
    """A numerical failure (non-finite state, violated resolution guard, ...)."""


class StepSizeError(NumericalError):
    pass


class NonFiniteStateError(NumericalError):
    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t = {t:.6e} s")
        self.t = t


def rk4(f, y0, dt: float, n_steps: int, t0: float = 0.0, store_stages: bool = False):
    """Integrate ``y' = f(t, y)`` with ``n_steps`` RK4 steps of size ``dt``.

    Returns ``(times, ys)`` where ``ys[i]`` is the state at ``times[i]``; with
    ``store_stages`` also returns the four stage inputs of every step, shape
    ``(n_steps, 4) + y.shape``, so a second system driven by ``y`` can be
    advanced with exactly the same substep values.
    """
    y = np.array(y0, copy=True)
    ys = np.empty((n_steps + 1,) + y.shape, dtype=y.dtype)
    ys[0] = y
    stages = np.empty((n_steps, 4) + y.shape, dtype=y.dtype) if store_stages else None
    half = 0.5 * dt
    for i in range(n_steps):
        t = t0 + i * dt
        k1 = f(t, y)
        y2 = y + half * k1
        k2 = f(t + half, y2)
        y3 = y + half * k2
        k3 = f(t + half, y3)
        y4 = y + dt * k3
        k4 = f(t + dt, y4)
        if stages is not None:
            stages[i, 0] = y
            stages[i, 1] = y2
            stages[i, 2] = y3
            stages[i, 3] = y4
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteStateError(t + dt)
        ys[i + 1] = y
    times = t0 + dt * np.arange(n_steps + 1)
    if store_stages:
        return times, ys, stages
    return times, ys
