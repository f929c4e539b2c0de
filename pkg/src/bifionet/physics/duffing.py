"""Duffing oscillator solvers.

    u'' + delta u' + alpha u + beta u^3 = gamma cos(omega t),  u(0) = u0, u'(0) = v0

Integrated with classical RK4 as a first-order system.  All parameters may be
arrays of equal length, in which case realizations are integrated together.
Output is sampled at ``n_out`` equidistant times on [0, t_end]; each interval
between output times is split into equal steps no longer than ``dt`` so
samples fall exactly on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import ContractError, DivergenceError

DELTA_NOMINAL = 1.5


@dataclass(frozen=True)
class DuffingConfig:
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 1.0
    gamma: float = 2.5
    omega: float = 2.0
    t_end: float = 10.0
    u0: float = 0.0
    v0: float = 0.0
    dt: float = 1e-3
    n_out: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ContractError(f"t_span [0, {self.t_end}] is not ordered")
        if self.n_out < 2:
            raise ContractError("need at least two output times")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_out)


def _substeps(times: np.ndarray, dt: float) -> list[tuple[int, float]]:
    out = []
    for a, b in zip(times[:-1], times[1:]):
        n = max(1, int(np.ceil((b - a) / dt - 1e-9)))
        out.append((n, (b - a) / n))
    return out


def rk4_integrate(rhs: Callable, y0: np.ndarray, times: np.ndarray, dt: float) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` and return ``y`` at ``times`` (first axis)."""
    y = np.array(y0, dtype=np.float64)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for k, (n, h) in enumerate(_substeps(times, dt)):
        t = times[k]
        with np.errstate(over="ignore", invalid="ignore"):  # blow-up is reported below
            for _ in range(n):
                k1 = rhs(t, y)
                k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
                k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
                k4 = rhs(t + h, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                t += h
        if not np.all(np.isfinite(y)):
            raise DivergenceError(f"non-finite state by t={times[k + 1]:.6g}", time=float(times[k + 1]))
        out[k + 1] = y
    return out


def duffing_trajectories(alpha=1.0, beta=1.0, delta=1.0, gamma=2.5, omega=2.0,
                         u0=0.0, v0=0.0, t_end=10.0, dt=1e-3, n_out=100, times=None) -> np.ndarray:
    """Batched solve; returns [n_realizations x n_times] (or [n_times] for scalars).

    ``times`` (increasing, starting at 0) overrides the default equidistant grid.
    """
    params = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64)
                                   for v in (alpha, beta, delta, gamma, omega, u0, v0)))
    scalar = params[0].ndim == 0
    a, b, d, g, w, x0, y0 = (np.atleast_1d(p).ravel() for p in params)

    def rhs(t, y):
        u, v = y
        return np.stack((v, g * np.cos(w * t) - d * v - a * u - b * u**3))

    if times is None:
        times = np.linspace(0.0, t_end, n_out)
    else:
        times = np.asarray(times, dtype=np.float64)
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ContractError("times must start at 0 and increase strictly")
    traj = rk4_integrate(rhs, np.stack((x0, y0)), times, dt)[:, 0, :].T
    return traj[0] if scalar else traj


def duffing_solve(cfg: DuffingConfig) -> np.ndarray:
    """Displacement at the ``cfg.n_out`` output times."""
    return duffing_trajectories(cfg.alpha, cfg.beta, cfg.delta, cfg.gamma, cfg.omega,
                                cfg.u0, cfg.v0, cfg.t_end, cfg.dt, cfg.n_out)


def lofi_config(cfg: DuffingConfig, mode: str = "I", delta_nom: float = DELTA_NOMINAL) -> DuffingConfig:
    """Drop the cubic stiffness; mode II also replaces the damping by its nominal value."""
    if mode == "I":
        return replace(cfg, beta=0.0)
    if mode == "II":
        return replace(cfg, beta=0.0, delta=delta_nom)
    raise ContractError(f"unknown low-fidelity mode {mode!r}")


def duffing_lofi_solve(cfg: DuffingConfig, mode: str = "I", delta_nom: float = DELTA_NOMINAL) -> np.ndarray:
    return duffing_solve(lofi_config(cfg, mode, delta_nom))


def steady_state_response(cfg: DuffingConfig, t) -> np.ndarray:
    """Periodic response of the linear oscillator (beta must be 0)."""
    if cfg.beta != 0:
        raise ContractError("steady-state formula needs beta = 0")
    H = 1.0 / (cfg.alpha - cfg.omega**2 + 1j * cfg.delta * cfg.omega)
    return np.real(cfg.gamma * H * np.exp(1j * cfg.omega * np.asarray(t)))


def linear_discrepancy_oracle(
    lofi: DuffingConfig,
    d_delta: float = 0.0,
    d_alpha: float = 0.0,
    forcing_u: Callable[[float], float] | None = None,
) -> np.ndarray:
    """Integrate the discrepancy equation of a linear perturbation directly.

    The true system is the low-fidelity oscillator with damping and stiffness
    shifted by ``d_delta``/``d_alpha`` and extra forcing ``forcing_u(t)``.  The
    discrepancy ``u_d = u - u_l`` solves::

        u_d'' + (delta+d_delta) u_d' + (alpha+d_alpha) u_d
            = forcing_u(t) - d_delta u_l' - d_alpha u_l

    with zero initial state.  ``u_l`` is integrated alongside so its velocity
    is available at every RK4 stage.
    """
    if lofi.beta != 0:
        raise ContractError("discrepancy oracle requires linear operators (beta = 0)")
    a_l, d_l = lofi.alpha, lofi.delta
    a_t, d_t = a_l + d_alpha, d_l + d_delta
    g, w = lofi.gamma, lofi.omega
    fu = forcing_u if forcing_u is not None else (lambda t: 0.0)

    def rhs(t, y):
        ul, vl, ud, vd = y
        al = g * np.cos(w * t) - d_l * vl - a_l * ul
        ad = fu(t) - d_delta * vl - d_alpha * ul - d_t * vd - a_t * ud
        return np.array([vl, al, vd, ad])

    y0 = np.array([lofi.u0, lofi.v0, 0.0, 0.0])
    return rk4_integrate(rhs, y0, lofi.times, lofi.dt)[:, 2]
