"""Bi-fidelity composition: a low-fidelity solver plus a discrepancy DeepONet.

The network is trained on ``u - u_l`` with the low-fidelity response at the
sensor grid as branch input; predictions add ``u_l`` back.  The same
high-fidelity samples also yield the standard baseline bundle, in which the
branch sees the source term (or the uncertain inputs) and the target is ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .data import DatasetBundle
from .deeponet import DeepONet, SensorGrid, onet_forward
from .errors import BifionetError, ContractError, DimensionError, SolverError
from .physics.duffing import DELTA_NOMINAL, DuffingConfig, duffing_trajectories, lofi_config
from .physics.heat import HeatModelConfig, Lattice, default_lattice, heat_lofi_solve

PER_REALIZATION = "per-realization"
SOLVE_ONCE = "solve-once-deterministic"


class LowFidelitySolver(Protocol):
    cost: str

    def evaluate(self, xi: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """u_l at ``coords`` (one row per point) for a single realization ``xi``."""

    def evaluate_many(self, xis: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """[n_realizations x n_points] responses."""


def _as_coords(coords) -> np.ndarray:
    c = np.asarray(coords, dtype=np.float64)
    return c[:, None] if c.ndim == 1 else c


class DuffingLowFidelity:
    """Linear oscillator (beta = 0); mode II also fixes the damping at its nominal value.

    ``xi`` holds the uncertain inputs named by ``xi_names`` (``beta`` is
    accepted and ignored since the low-fidelity model has no cubic term).
    """

    cost = PER_REALIZATION

    def __init__(self, mode: str = "I", base: DuffingConfig | None = None,
                 xi_names: Sequence[str] = ("beta", "omega"), delta_nom: float = DELTA_NOMINAL):
        self.mode = mode
        self.base = lofi_config(base or DuffingConfig(), mode, delta_nom)
        self.xi_names = tuple(xi_names)
        unknown = set(self.xi_names) - {"alpha", "beta", "delta", "gamma", "omega"}
        if unknown:
            raise ContractError(f"unknown Duffing inputs {sorted(unknown)}")

    def _params(self, xis: np.ndarray) -> dict:
        cfg = self.base
        params = {k: np.full(xis.shape[0], getattr(cfg, k)) for k in ("alpha", "delta", "gamma", "omega")}
        for j, name in enumerate(self.xi_names):
            if name == "beta":
                continue
            if name == "delta" and self.mode == "II":
                continue
            params[name] = xis[:, j]
        return params

    def evaluate_many(self, xis, coords) -> np.ndarray:
        xis = np.atleast_2d(np.asarray(xis, dtype=np.float64))
        if xis.shape[1] != len(self.xi_names):
            raise DimensionError(f"expected {len(self.xi_names)} uncertain inputs, got {xis.shape[1]}")
        t = _as_coords(coords)[:, 0]
        grid, inverse = np.unique(np.concatenate([[0.0], t]), return_inverse=True)
        if grid[0] < 0:
            raise ContractError("query times must be non-negative")
        cfg = self.base
        traj = duffing_trajectories(beta=0.0, u0=cfg.u0, v0=cfg.v0, dt=cfg.dt, times=grid,
                                    **self._params(xis))
        return traj[:, inverse[1:]]

    def evaluate(self, xi, coords) -> np.ndarray:
        return self.evaluate_many(np.atleast_2d(xi), coords)[0]


class HeatLowFidelity:
    """Deterministic plate model (uniform k0, nominal source), solved once and interpolated."""

    cost = SOLVE_ONCE

    def __init__(self, mode: str = "I", cfg: HeatModelConfig | None = None, lattice: Lattice | None = None):
        self.mode = mode
        self.cfg = cfg or HeatModelConfig()
        self.lattice = lattice if lattice is not None else default_lattice(self.cfg)
        self._T: np.ndarray | None = None

    @property
    def nodal(self) -> np.ndarray:
        if self._T is None:
            self._T = heat_lofi_solve(self.cfg, self.mode, self.lattice).T
        return self._T

    def evaluate(self, xi, coords) -> np.ndarray:
        return self.lattice.interpolate(self.nodal, _as_coords(coords))

    def evaluate_many(self, xis, coords) -> np.ndarray:
        row = self.evaluate(None, coords)
        return np.tile(row, (np.atleast_2d(xis).shape[0], 1))


@dataclass
class HifiSamples:
    """High-fidelity responses ``values[j, i] = u(coords[i]; xi[j])`` on shared coordinates."""

    xi: np.ndarray
    coords: np.ndarray
    values: np.ndarray
    xi_names: list[str] | None = None
    coord_names: list[str] | None = None

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=np.float64))
        self.coords = _as_coords(self.coords)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.values.shape != (self.xi.shape[0], self.coords.shape[0]):
            raise DimensionError(
                f"values {self.values.shape} do not match {self.xi.shape[0]} realizations "
                f"x {self.coords.shape[0]} points")

    @property
    def n(self) -> int:
        return self.xi.shape[0]


@dataclass(frozen=True)
class TrunkLayout:
    """Trunk input = query coordinates followed by the selected columns of xi.

    An empty ``xi_columns`` gives the coordinate-only trunk of the structural case.
    """

    xi_columns: tuple[int, ...] = ()

    def rows(self, coords: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Trunk rows for every (realization, point) pair, realization-major."""
        coords = _as_coords(coords)
        xi = np.atleast_2d(xi)
        n, nd = xi.shape[0], coords.shape[0]
        blocks = [np.tile(coords, (n, 1))]
        if self.xi_columns:
            blocks.append(np.repeat(xi[:, list(self.xi_columns)], nd, axis=0))
        return np.hstack(blocks)

    def names(self, coord_names, xi_names) -> list[str]:
        return list(coord_names) + [xi_names[j] for j in self.xi_columns]


def _lofi_many(lofi: LowFidelitySolver, xi: np.ndarray, coords: np.ndarray) -> np.ndarray:
    try:
        return lofi.evaluate_many(xi, coords)
    except (BifionetError, ArithmeticError):
        pass
    # Re-run one realization at a time to find which one fails.
    rows = []
    for j, x in enumerate(xi):
        try:
            rows.append(lofi.evaluate(x, coords))
        except (BifionetError, ArithmeticError) as exc:
            raise SolverError(f"low-fidelity solve failed for realization {j}: {exc}", xi=x, index=j) from exc
    return np.vstack(rows)


def _names(samples: HifiSamples):
    coord_names = samples.coord_names or [f"x{k}" for k in range(samples.coords.shape[1])]
    xi_names = samples.xi_names or [f"xi{k}" for k in range(samples.xi.shape[1])]
    return coord_names, xi_names


def build_discrepancy_dataset(samples: HifiSamples, lofi: LowFidelitySolver, sensors: SensorGrid,
                              layout: TrunkLayout = TrunkLayout(), meta: dict | None = None) -> DatasetBundle:
    """Branch rows = u_l at the sensors, targets = u - u_l at the sample points.

    The low-fidelity response at the sample points is kept as the bundle
    offset so the full response can be recovered.
    """
    branch = _lofi_many(lofi, samples.xi, sensors.locations)
    u_low = _lofi_many(lofi, samples.xi, samples.coords)
    coord_names, xi_names = _names(samples)
    n, nd = samples.values.shape
    return DatasetBundle(
        branch=branch,
        trunk=layout.rows(samples.coords, samples.xi),
        target=(samples.values - u_low).ravel(),
        index=np.repeat(np.arange(n), nd),
        offset=u_low.ravel(),
        meta={"kind": "bifidelity", **(meta or {})},
        branch_names=[f"u_low_s{j}" for j in range(sensors.m)],
        trunk_names=layout.names(coord_names, xi_names),
    )


def standard_baseline_dataset(samples: HifiSamples, source_sampler: Callable[[np.ndarray, np.ndarray], np.ndarray],
                              sensors: SensorGrid | None, layout: TrunkLayout = TrunkLayout(),
                              meta: dict | None = None, branch_names=None) -> DatasetBundle:
    """Branch rows = ``source_sampler(xi, sensor_locations)``, targets = u."""
    locs = None if sensors is None else sensors.locations
    branch = np.vstack([np.atleast_1d(source_sampler(x, locs)) for x in samples.xi])
    coord_names, xi_names = _names(samples)
    n, nd = samples.values.shape
    return DatasetBundle(
        branch=branch,
        trunk=layout.rows(samples.coords, samples.xi),
        target=samples.values.ravel(),
        index=np.repeat(np.arange(n), nd),
        meta={"kind": "standard", **(meta or {})},
        branch_names=branch_names or [f"f_s{j}" for j in range(branch.shape[1])],
        trunk_names=layout.names(coord_names, xi_names),
    )


def xi_source(xi, locations) -> np.ndarray:
    """Source sampler that hands the uncertain-input vector itself to the branch."""
    return np.asarray(xi, dtype=np.float64)


@dataclass
class BiFidelityModel:
    lofi: LowFidelitySolver
    net: DeepONet
    layout: TrunkLayout = field(default_factory=TrunkLayout)

    def __post_init__(self):
        if self.net.sensors is None:
            raise ContractError("discrepancy network needs a stored sensor grid")

    def correction(self, coords, xi) -> np.ndarray:
        coords = _as_coords(coords)
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        branch = _lofi_many(self.lofi, xi, self.net.sensors.locations)
        trunk = self.layout.rows(coords, xi)
        index = np.repeat(np.arange(xi.shape[0]), coords.shape[0])
        return onet_forward(self.net, branch, trunk, index).data.reshape(xi.shape[0], coords.shape[0])

    def predict(self, coords, xi) -> np.ndarray:
        """u_l + G(u_l at sensors)(trunk); [n_realizations x n_points], squeezed for a single xi."""
        xi_arr = np.asarray(xi, dtype=np.float64)
        single = xi_arr.ndim <= 1
        xi2 = np.atleast_2d(xi_arr)
        out = _lofi_many(self.lofi, xi2, _as_coords(coords)) + self.correction(coords, xi2)
        return out[0] if single else out

