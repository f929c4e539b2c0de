"""Truncated Karhunen-Loeve expansion of a squared-exponential Gaussian field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DimensionError
from ..linalg import symmetric_eig


def sqexp_covariance(x: np.ndarray, y: np.ndarray | None = None, length_scales=(0.5, 0.5)) -> np.ndarray:
    """K(x, x') = exp(-1/2 sum_i ((x_i - x'_i) / l_i)^2)."""
    x = np.atleast_2d(x)
    y = x if y is None else np.atleast_2d(y)
    ls = np.broadcast_to(np.asarray(length_scales, dtype=np.float64), (x.shape[1],))
    d = (x[:, None, :] - y[None, :, :]) / ls
    return np.exp(-0.5 * np.sum(d * d, axis=-1))


@dataclass
class RandomFieldKL:
    nodes: np.ndarray
    length_scales: tuple[float, ...]
    eigenvalues: np.ndarray  # kept, descending
    modes: np.ndarray  # [n_nodes x n_kl]
    all_eigenvalues: np.ndarray

    @property
    def n_kl(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def energy_fraction(self) -> float:
        return float(self.eigenvalues.sum() / self.all_eigenvalues.sum())

    def truncated_covariance(self) -> np.ndarray:
        return (self.modes * self.eigenvalues) @ self.modes.T


def kl_build(nodes, length_scales=(0.5, 0.5), n_kl: int = 25) -> RandomFieldKL:
    """Eigendecompose the nodal covariance matrix and keep the leading ``n_kl`` pairs."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=np.float64))
    if nodes.shape[0] < n_kl:
        raise ContractError(f"need at least {n_kl} nodes, got {nodes.shape[0]}")
    lam, phi = symmetric_eig(sqexp_covariance(nodes, length_scales=length_scales))
    lam = np.clip(lam, 0.0, None)
    return RandomFieldKL(nodes, tuple(np.broadcast_to(length_scales, (nodes.shape[1],)).tolist()),
                         lam[:n_kl].copy(), phi[:, :n_kl].copy(), lam)


def kl_sample(field: RandomFieldKL, xi) -> np.ndarray:
    """z = sum_k sqrt(lambda_k) phi_k xi_k; ``xi`` may be [n_kl] or [n_samples x n_kl]."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape[-1] != field.n_kl:
        raise DimensionError(f"expected {field.n_kl} KL coefficients, got {xi.shape[-1]}")
    return (xi * np.sqrt(field.eigenvalues)) @ field.modes.T
