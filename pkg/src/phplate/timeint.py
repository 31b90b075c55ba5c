"""Crank-Nicolson integration of M e' = J e + F(t) with energy bookkeeping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import Factorization, lu_factor, solve


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (nsteps + 1, ndof) free coefficients
    energy: np.ndarray
    power_residual: np.ndarray  # one entry per step, first entry 0
    solver_residuals: list[float] = field(default_factory=list)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "H", "power_residual"])
            for t, H, r in zip(self.times, self.energy, self.power_residual):
                w.writerow([repr(float(t)), repr(float(H)), repr(float(r))])


def cn_operator(M, J, dt: float) -> Factorization:
    """Factor M - dt/2 J once per run."""
    return lu_factor((M - 0.5 * dt * J).tocsc())


def cn_step(F_op: Factorization, M, J, e_n, load_n, load_np1, dt: float, residuals=None):
    rhs = M @ e_n + 0.5 * dt * (J @ e_n) + 0.5 * dt * (load_n + load_np1)
    e = solve(F_op, rhs)
    if residuals is not None:
        r = F_op.A @ e - rhs
        nb = np.linalg.norm(rhs)
        residuals.append(float(np.linalg.norm(r) / nb) if nb else float(np.linalg.norm(r)))
    return e


def num_steps(dt: float, t_final: float) -> int:
    n = int(round(t_final / dt))
    if n < 1 or abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"time step {dt} does not divide final time {t_final}")
    return n


def integrate(
    M,
    J,
    e0: np.ndarray,
    load: Callable[[float], np.ndarray] | None,
    dt: float,
    t_final: float,
    callback: Callable[[int, float, np.ndarray], None] | None = None,
    keep_states: bool = True,
) -> Trajectory:
    """March from t = 0 to t_final with uniform steps.

    ``load(t)`` returns the load vector on the same dofs as ``e0``; ``None``
    means unforced.  ``callback(i, t_i, e_i)`` is called at every time level,
    including the initial one.
    """
    n = num_steps(dt, t_final)
    dt = t_final / n
    times = np.linspace(0.0, t_final, n + 1)
    F_op = cn_operator(M, J, dt)
    e = np.asarray(e0, dtype=float).copy()
    zero = np.zeros_like(e)
    f_prev = load(0.0) if load is not None else zero
    energy = np.empty(n + 1)
    power = np.zeros(n + 1)
    energy[0] = 0.5 * e @ (M @ e)
    states = [e.copy()] if keep_states else []
    residuals: list[float] = []
    if callback is not None:
        callback(0, 0.0, e)
    for i in range(1, n + 1):
        f_next = load(times[i]) if load is not None else zero
        e_new = cn_step(F_op, M, J, e, f_prev, f_next, dt, residuals)
        energy[i] = 0.5 * e_new @ (M @ e_new)
        supplied = dt * 0.5 * (e + e_new) @ (0.5 * (f_prev + f_next))
        power[i] = energy[i] - energy[i - 1] - supplied
        e, f_prev = e_new, f_next
        if keep_states:
            states.append(e.copy())
        if callback is not None:
            callback(i, times[i], e)
    return Trajectory(
        times=times,
        states=np.array(states) if keep_states else np.zeros((0, len(e))),
        energy=energy,
        power_residual=power,
        solver_residuals=residuals,
    )
