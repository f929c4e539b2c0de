"""Steady nonlinear heat balance in a thin plate.

    -h_t div(k grad T) + 2 h_c T + 2 eps sigma T^4 = 2 h_c T_a + 2 eps sigma T_a^4 + Q

Discretized with vertex-centred finite volumes on a lattice of square cells:
each node owns a quarter of every adjacent in-domain cell, and each cell edge
carries a conductance ``h_t * k_edge / 2`` per adjacent cell (``k_edge`` is
the mean of the two nodal conductivities).  On a uniform interior this is
the standard 5-point stencil; zero-flux boundaries fall out of the missing
cells.  Nodes on the left edge (x1 = 0) are held at ``T_left``.  The
nonlinear system is solved by Newton's method with step halving.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ContractError, ConvergenceError

STEFAN_BOLTZMANN = 5.670373e-8


@dataclass(frozen=True)
class HeatModelConfig:
    h_t: float = 0.01
    h_c: float = 1.0
    emissivity: float = 0.025
    sigma: float = STEFAN_BOLTZMANN
    k0: float = 400.0
    Q0: float = 5e3
    T_ambient: float = 300.0
    T_left: float = 100.0
    h: float = 0.05
    plate_size: float = 3.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50

    def __post_init__(self):
        for name in ("h_t", "h_c", "sigma", "k0", "Q0", "h", "plate_size"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.emissivity < 0:
            raise ContractError("emissivity must be non-negative")


class Lattice:
    """Nodes and cells of a domain made of whole ``h x h`` squares.

    ``cell_mask[i, j]`` marks the cell with lower-left corner ``(x0 + i h, y0 + j h)``.
    """

    def __init__(self, cell_mask: np.ndarray, h: float, origin=(0.0, 0.0)):
        self.cell_mask = np.asarray(cell_mask, dtype=bool)
        self.h = float(h)
        self.origin = np.asarray(origin, dtype=np.float64)
        nx, ny = self.cell_mask.shape
        node_used = np.zeros((nx + 1, ny + 1), dtype=bool)
        ci, cj = np.nonzero(self.cell_mask)
        for di in (0, 1):
            for dj in (0, 1):
                node_used[ci + di, cj + dj] = True
        self.node_id = -np.ones((nx + 1, ny + 1), dtype=np.int64)
        ii, jj = np.nonzero(node_used)
        self.node_id[ii, jj] = np.arange(ii.size)
        self.node_ij = np.column_stack([ii, jj])
        self.nodes = self.origin + self.h * self.node_ij
        self.cells = np.column_stack([
            self.node_id[ci, cj], self.node_id[ci + 1, cj],
            self.node_id[ci, cj + 1], self.node_id[ci + 1, cj + 1],
        ])

    @classmethod
    def l_shape(cls, h: float = 0.05, size: float = 3.0) -> "Lattice":
        """[0, size]^2 without the open upper-right quarter (size/2, size)^2."""
        n = int(round(size / h))
        if not np.isclose(n * h, size) or n % 2:
            raise ContractError(f"h={h} must divide size/2={size / 2}")
        mask = np.ones((n, n), dtype=bool)
        mask[n // 2:, n // 2:] = False
        return cls(mask, h)

    @classmethod
    def rectangle(cls, width: float, height: float, h: float) -> "Lattice":
        nx, ny = int(round(width / h)), int(round(height / h))
        return cls(np.ones((nx, ny), dtype=bool), h)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def areas(self) -> np.ndarray:
        a = np.zeros(self.n_nodes)
        np.add.at(a, self.cells.ravel(), 0.25 * self.h**2)
        return a

    @cached_property
    def edges(self) -> np.ndarray:
        """Cell edges, one row per (cell, edge) pair: [node_a, node_b]."""
        c = self.cells
        return np.concatenate([c[:, [0, 1]], c[:, [2, 3]], c[:, [0, 2]], c[:, [1, 3]]])

    @cached_property
    def left_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_ij[:, 0] == 0)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.array([self._cell_of(p) is not None for p in pts])

    def _cell_of(self, p) -> tuple[int, int] | None:
        nx, ny = self.cell_mask.shape
        s = (np.asarray(p) - self.origin) / self.h
        eps = 1e-9
        cand_i = {int(np.floor(s[0] + eps)), int(np.floor(s[0] - eps))}
        cand_j = {int(np.floor(s[1] + eps)), int(np.floor(s[1] - eps))}
        for i in sorted(cand_i):
            for j in sorted(cand_j):
                if 0 <= i < nx and 0 <= j < ny and self.cell_mask[i, j] \
                        and -eps <= s[0] - i <= 1 + eps and -eps <= s[1] - j <= 1 + eps:
                    return i, j
        return None

    def interpolate(self, values: np.ndarray, points) -> np.ndarray:
        """Bilinear interpolation of nodal ``values`` (last axis = nodes) at ``points``."""
        values = np.asarray(values, dtype=np.float64)
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        ids = np.empty((pts.shape[0], 4), dtype=np.int64)
        wts = np.empty((pts.shape[0], 4))
        for r, p in enumerate(pts):
            cell = self._cell_of(p)
            if cell is None:
                raise ContractError(f"point {p.tolist()} lies outside the domain")
            i, j = cell
            fx, fy = (p - self.origin) / self.h - (i, j)
            fx, fy = min(max(fx, 0.0), 1.0), min(max(fy, 0.0), 1.0)
            ids[r] = (self.node_id[i, j], self.node_id[i + 1, j], self.node_id[i, j + 1], self.node_id[i + 1, j + 1])
            wts[r] = ((1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy)
        return np.sum(values[..., ids] * wts, axis=-1)


def default_lattice(cfg: HeatModelConfig) -> Lattice:
    return Lattice.l_shape(cfg.h, cfg.plate_size)


@dataclass
class HeatSolution:
    T: np.ndarray
    iterations: int
    residuals: list[float] = field(default_factory=list)


def gaussian_source(nodes: np.ndarray, Q0: float, xi_q: float = 0.0) -> np.ndarray:
    """Q0 (1 + 0.1 xi_Q) exp(-(x1^2 + x2^2)), centred on the origin corner."""
    nodes = np.atleast_2d(nodes)
    return Q0 * (1.0 + 0.1 * xi_q) * np.exp(-np.sum(nodes**2, axis=1))


def rhs_field(cfg: HeatModelConfig, source: np.ndarray) -> np.ndarray:
    """Right-hand side 2 h_c T_a + 2 eps sigma T_a^4 + Q at every node."""
    Ta = cfg.T_ambient
    return 2 * cfg.h_c * Ta + 2 * cfg.emissivity * cfg.sigma * Ta**4 + np.asarray(source)


def stiffness(lattice: Lattice, k: np.ndarray, h_t: float) -> sp.csr_matrix:
    e = lattice.edges
    kc = 0.5 * h_t * 0.5 * (k[e[:, 0]] + k[e[:, 1]])
    n = lattice.n_nodes
    rows = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 1], e[:, 0]])
    vals = np.concatenate([kc, kc, -kc, -kc])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def heat_solve(cfg: HeatModelConfig, k, source, lattice: Lattice | None = None,
               dirichlet: np.ndarray | None = None) -> HeatSolution:
    """Newton solve of the discrete heat balance.

    ``k`` and ``source`` are nodal arrays (a scalar ``k`` means uniform).
    ``dirichlet`` defaults to the left-edge nodes.  Convergence is declared
    when the max-norm of the cell-integrated residual drops below
    ``cfg.newton_tol``.
    """
    lat = lattice if lattice is not None else default_lattice(cfg)
    n = lat.n_nodes
    k = np.broadcast_to(np.asarray(k, dtype=np.float64), (n,))
    source = np.broadcast_to(np.asarray(source, dtype=np.float64), (n,))
    if np.any(~(k > 0)):
        raise ContractError("conductivity must be positive everywhere")
    fixed = lat.left_nodes if dirichlet is None else np.asarray(dirichlet)
    free = np.setdiff1d(np.arange(n), fixed)

    K = stiffness(lat, k, cfg.h_t)
    A = lat.areas
    c_rad = 2 * cfg.emissivity * cfg.sigma
    b = A * rhs_field(cfg, source)
    Kff = K[free][:, free]
    Kfd = K[free][:, fixed]
    Af, bf = A[free], b[free]

    T = np.full(n, cfg.T_ambient)
    T[fixed] = cfg.T_left
    lift = Kfd @ T[fixed]

    def residual(Tf):
        return Kff @ Tf + lift + Af * (2 * cfg.h_c * Tf + c_rad * Tf**4) - bf

    Tf = T[free].copy()
    R = residual(Tf)
    history = [float(np.max(np.abs(R)))]
    it = 0
    while history[-1] >= cfg.newton_tol:
        if it >= cfg.newton_max_iter:
            raise ConvergenceError(
                f"Newton did not converge in {cfg.newton_max_iter} iterations", history)
        J = Kff + sp.diags(Af * (2 * cfg.h_c + 4 * c_rad * Tf**3))
        step = spla.spsolve(J.tocsc(), -R)
        lam = 1.0
        while True:
            trial = Tf + lam * step
            Rt = residual(trial)
            if np.max(np.abs(Rt)) < history[-1] or lam < 1e-3:
                break
            lam *= 0.5
        Tf, R = trial, Rt
        it += 1
        history.append(float(np.max(np.abs(R))))
        if lam < 1e-3 and history[-1] >= history[-2]:
            raise ConvergenceError("Newton line search stalled", history)
    T[free] = Tf
    return HeatSolution(T, it, history)


def heat_lofi_solve(cfg: HeatModelConfig, mode: str = "I", lattice: Lattice | None = None) -> HeatSolution:
    """Uniform conductivity k0 and the nominal source; mode II also drops radiation."""
    lat = lattice if lattice is not None else default_lattice(cfg)
    if mode == "II":
        cfg = replace(cfg, emissivity=0.0)
    elif mode != "I":
        raise ContractError(f"unknown low-fidelity mode {mode!r}")
    return heat_solve(cfg, cfg.k0, gaussian_source(lat.nodes, cfg.Q0), lat)


def conductivity(cfg: HeatModelConfig, z: np.ndarray) -> np.ndarray:
    """k(x) = k0 + exp(z(x))."""
    return cfg.k0 + np.exp(np.asarray(z))
