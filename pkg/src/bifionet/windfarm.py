"""Analytic wake toy model of a six-turbine farm, used as a synthetic external dataset.

Turbines (rotor diameter 126 m) sit on a 3 x 2 grid with 474 m spacing in
x and 387 m in y.  The uncertain inputs are free-stream speed U (m/s), wind
direction theta (deg, 0 = along +x) and a common yaw offset gamma (deg).

High fidelity: Gaussian wake whose width grows linearly downstream, lateral
wake deflection from yaw, root-sum-square superposition, and a cos^1.88 yaw
power loss.  Low fidelity: top-hat (Jensen) wake, no deflection, cos^2 loss.
Power is reported in MW with a fixed power coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bifidelity import PER_REALIZATION, HifiSamples
from .errors import ContractError, DimensionError

ROTOR_DIAMETER = 126.0
AIR_DENSITY = 1.225
POWER_COEFF = 0.45
THRUST_COEFF = 0.8

XI_NAMES = ["wind_speed", "wind_direction", "yaw"]
XI_BOUNDS = np.array([[6.0, 10.0], [-20.0, 20.0], [-25.0, 25.0]])


def turbine_layout(nx: int = 3, ny: int = 2, sx: float = 474.0, sy: float = 387.0) -> np.ndarray:
    """[n_turbines x 2] positions, x-major."""
    gx, gy = np.meshgrid(np.arange(nx) * sx, np.arange(ny) * sy, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def _frame(pos: np.ndarray, theta_deg: float):
    """Downstream and cross-stream separations: [i, j] is turbine j seen from turbine i."""
    th = np.deg2rad(theta_deg)
    d = pos[None, :, :] - pos[:, None, :]
    down = d[..., 0] * np.cos(th) + d[..., 1] * np.sin(th)
    cross = -d[..., 0] * np.sin(th) + d[..., 1] * np.cos(th)
    return down, cross


def _rotor_power(speed: np.ndarray, yaw_deg: float, exponent: float) -> np.ndarray:
    area = np.pi * ROTOR_DIAMETER**2 / 4
    return 0.5 * AIR_DENSITY * area * POWER_COEFF * speed**3 * np.cos(np.deg2rad(yaw_deg)) ** exponent / 1e6


def gaussian_wake_power(xi, pos: np.ndarray | None = None, k_star: float = 0.04) -> np.ndarray:
    """High-fidelity turbine powers (MW) for one realization ``xi = (U, theta, gamma)``."""
    U, theta, yaw = map(float, xi)
    pos = turbine_layout() if pos is None else pos
    D = ROTOR_DIAMETER
    down, cross = _frame(pos, theta)
    ct = THRUST_COEFF * np.cos(np.deg2rad(yaw)) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma = k_star * down + 0.35 * D
        peak = 1.0 - np.sqrt(np.clip(1.0 - ct / (8.0 * (sigma / D) ** 2), 0.0, None))
        shift = 0.3 * ct * np.sin(np.deg2rad(yaw)) * D * np.log1p(np.clip(down, 0, None) / D)
        deficit = peak * np.exp(-0.5 * ((cross - shift) / sigma) ** 2)
    deficit = np.where(down > 1e-6, deficit, 0.0)
    total = np.sqrt(np.sum(deficit**2, axis=0))
    return _rotor_power(U * (1.0 - total), yaw, 1.88)


def jensen_wake_power(xi, pos: np.ndarray | None = None, k_wake: float = 0.075) -> np.ndarray:
    """Low-fidelity turbine powers (MW) for one realization."""
    U, theta, yaw = map(float, xi)
    pos = turbine_layout() if pos is None else pos
    D = ROTOR_DIAMETER
    down, cross = _frame(pos, theta)
    radius = 0.5 * D + k_wake * np.clip(down, 0, None)
    deficit = (1.0 - np.sqrt(1.0 - THRUST_COEFF)) / (1.0 + 2.0 * k_wake * np.clip(down, 0, None) / D) ** 2
    deficit = np.where((down > 1e-6) & (np.abs(cross) < radius), deficit, 0.0)
    total = np.sqrt(np.sum(deficit**2, axis=0))
    return _rotor_power(U * (1.0 - total), yaw, 2.0)


def sample_wind_inputs(n: int, seed) -> np.ndarray:
    if n <= 0:
        raise ContractError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    return rng.uniform(XI_BOUNDS[:, 0], XI_BOUNDS[:, 1], (n, 3))


class WindLowFidelity:
    """Top-hat wake model evaluated at turbine locations (coords must be turbine positions)."""

    cost = PER_REALIZATION

    def __init__(self, pos: np.ndarray | None = None):
        self.pos = turbine_layout() if pos is None else np.asarray(pos, dtype=np.float64)

    def _which(self, coords) -> np.ndarray:
        c = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        hit = np.all(np.isclose(c[:, None, :], self.pos[None, :, :]), axis=-1)
        if not np.all(hit.any(axis=1)):
            raise ContractError("query point is not a turbine location")
        return hit.argmax(axis=1)

    def evaluate(self, xi, coords) -> np.ndarray:
        if np.size(xi) != 3:
            raise DimensionError(f"expected 3 wind inputs, got {np.size(xi)}")
        return jensen_wake_power(np.ravel(xi), self.pos)[self._which(coords)]

    def evaluate_many(self, xis, coords) -> np.ndarray:
        return np.vstack([self.evaluate(x, coords) for x in np.atleast_2d(xis)])


@dataclass
class WindSamples:
    hifi: HifiSamples
    pos: np.ndarray


def wind_hifi_samples(n: int, seed, pos: np.ndarray | None = None) -> WindSamples:
    pos = turbine_layout() if pos is None else pos
    xi = sample_wind_inputs(n, seed)
    values = np.vstack([gaussian_wake_power(x, pos) for x in xi])
    return WindSamples(HifiSamples(xi, pos, values, XI_NAMES, ["x", "y"]), pos)
