"""Crank-Nicolson integration of ``M dU/dt + K U = F(t)``."""
from dataclasses import dataclass

import numpy as np

from .linalg import ConvergenceError, NotSPDError, cg_solve


class TimeStepError(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"linear solve failed at step {step}: {cause}")
        self.step = step


@dataclass(frozen=True, eq=False)
class TransientSystem:
    M: object
    K: object
    load: object          # callable t -> vector, or None for zero load
    U0: np.ndarray
    dt: float
    t_final: float

    def __post_init__(self):
        n = self.M.shape[0]
        if self.M.shape != (n, n) or self.K.shape != (n, n) or np.shape(self.U0) != (n,):
            raise ValueError("M, K and U0 dimensions do not match")
        if not (self.dt > 0 and self.t_final > 0):
            raise ValueError("dt and t_final must be positive")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError(f"t_final/dt = {steps!r} is not an integer")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


def crank_nicolson_run(sys, observer=None, every=1, tol=1e-10):
    """Advance to ``t_final``; returns the final state.

    ``observer(n, t_n, U_n)`` is called for ``n = 0`` and every ``every``-th
    step afterwards (and always for the last step) with a read-only view.
    """
    dt = sys.dt
    lhs = (sys.M + 0.5 * dt * sys.K).tocsr()
    rhs_op = (sys.M - 0.5 * dt * sys.K).tocsr()
    U = np.array(sys.U0, dtype=float)
    n_steps = sys.n_steps

    def notify(n):
        if observer is not None:
            view = U.view()
            view.setflags(write=False)
            observer(n, n * dt, view)

    notify(0)
    load_prev = None if sys.load is None else np.asarray(sys.load(0.0), dtype=float)
    for n in range(n_steps):
        rhs = rhs_op @ U
        if sys.load is not None:
            load_next = np.asarray(sys.load((n + 1) * dt), dtype=float)
            rhs += 0.5 * dt * (load_prev + load_next)
            load_prev = load_next
        try:
            U = cg_solve(lhs, rhs, tol=tol, x0=U)
        except (ConvergenceError, NotSPDError) as exc:
            raise TimeStepError(n + 1, exc) from exc
        if (n + 1) % every == 0 or n + 1 == n_steps:
            notify(n + 1)
    return U
