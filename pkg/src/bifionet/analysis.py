"""Validation metrics and covariance-spectrum bounds on reconstruction error."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import fmt
from .errors import ContractError, DimensionError
from .linalg import symmetric_eig
from .physics.duffing import DELTA_NOMINAL, duffing_trajectories
from .physics.sampling import sample_uncertain_inputs


def relative_rmse(pred, truth) -> float:
    """||pred - truth||_2 / ||truth||_2."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape or pred.size == 0:
        raise DimensionError(f"relative_rmse: shapes {pred.shape} and {truth.shape}")
    denom = np.linalg.norm(truth)
    if denom == 0:
        raise ContractError("relative_rmse: truth has zero norm")
    return float(np.linalg.norm(pred - truth) / denom)


def per_group_errors(pred, truth, groups) -> np.ndarray:
    """Relative RMSE within each group label (one per realization), in label order."""
    pred, truth, groups = np.asarray(pred), np.asarray(truth), np.asarray(groups)
    labels = np.unique(groups)
    return np.array([relative_rmse(pred[groups == g], truth[groups == g]) for g in labels])


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def rows(self):
        return zip(self.edges[:-1], self.edges[1:], self.counts)


def error_histogram(errors, n_bins: int = 30) -> Histogram:
    """Equal-width bins spanning [min, max] of ``errors``."""
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        raise ContractError("histogram of an empty error list")
    lo, hi = float(e.min()), float(e.max())
    if hi == lo:
        hi = lo + 1.0 if lo == 0 else lo + abs(lo) * 1e-12 + 1e-300
    counts, edges = np.histogram(e, bins=n_bins, range=(lo, hi))
    return Histogram(edges, counts)


@dataclass
class ValidationReport:
    epsilon_val: float
    errors: np.ndarray
    histogram: Histogram


def validation_report(pred, truth, groups, n_bins: int = 30) -> ValidationReport:
    errs = per_group_errors(pred, truth, groups)
    return ValidationReport(relative_rmse(pred, truth), errs, error_histogram(errs, n_bins))


@dataclass
class ReconstructionBound:
    eigenvalues: np.ndarray
    p_values: np.ndarray
    bounds: np.ndarray

    def tail(self, p: int) -> float:
        """sqrt(sum_{i > p} lambda_i) with 1-based eigenvalue indices."""
        return float(np.sqrt(self._tails()[min(p, self.eigenvalues.size)]))

    def _tails(self) -> np.ndarray:
        lam = self.eigenvalues
        return np.append(np.cumsum(lam[::-1])[::-1], 0.0)


def covariance_eigenvalues(samples) -> np.ndarray:
    """Eigenvalues (descending, clipped at 0) of the 1/(n-1) sample covariance.

    Uses the n x n Gram matrix of the centred samples when n < d; both share
    the same non-zero spectrum.  The result always has length d.
    """
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError("need an [n x d] sample matrix with n >= 2")
    n, d = X.shape
    Xc = X - X.mean(axis=0)
    if n < d:
        lam, _ = symmetric_eig(Xc @ Xc.T / (n - 1))
        lam = np.concatenate([lam, np.zeros(d - n)])
    else:
        lam, _ = symmetric_eig(Xc.T @ Xc / (n - 1))
    return np.clip(lam, 0.0, None)


def reconstruction_bound(samples, p_values) -> ReconstructionBound:
    """Lower bound sqrt(sum_{i>p} lambda_i) on p-term reconstruction error."""
    lam = covariance_eigenvalues(samples)
    ps = np.asarray(p_values, dtype=np.int64)
    if np.any(ps < 0):
        raise ContractError("p must be non-negative")
    rb = ReconstructionBound(lam, ps, np.zeros(ps.shape))
    tails = rb._tails()
    rb.bounds = np.sqrt(tails[np.minimum(ps, lam.size)])
    return rb


@dataclass
class BoundComparison:
    p: np.ndarray
    standard: np.ndarray
    bifi: np.ndarray

    @property
    def difference(self) -> np.ndarray:
        return self.standard - self.bifi


def duffing_targets(application: str, n: int, seed=0, dt: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """(u, u_d) trajectories on the 100-point grid for ``n`` random realizations."""
    if application == "I":
        xi = sample_uncertain_inputs("duffing-I", n, seed)
        beta, omega = xi[:, 0], xi[:, 1]
        u = duffing_trajectories(beta=beta, omega=omega, delta=1.0, dt=dt)
        ul = duffing_trajectories(beta=0.0 * beta, omega=omega, delta=1.0, dt=dt)
    elif application == "II":
        omega = sample_uncertain_inputs("duffing-II", n, seed)[:, 0]
        u = duffing_trajectories(beta=np.ones(n), omega=omega, delta=1.0, dt=dt)
        ul = duffing_trajectories(beta=np.zeros(n), omega=omega, delta=DELTA_NOMINAL, dt=dt)
    else:
        raise ContractError(f"unknown application {application!r}")
    return u, u - ul


def bound_comparison(application: str = "I", n: int = 2000, p_grid=None, seed=0) -> BoundComparison:
    """Reconstruction bounds for standard (u) and bi-fidelity (u - u_l) targets."""
    u, ud = duffing_targets(application, n, seed)
    p = np.arange(u.shape[1] + 1) if p_grid is None else np.asarray(p_grid)
    return BoundComparison(p, reconstruction_bound(u, p).bounds, reconstruction_bound(ud, p).bounds)


def write_histogram(path, hist: Histogram) -> None:
    with open(path, "w") as fh:
        fh.write("bin_left,bin_right,count\n")
        for lo, hi, c in hist.rows():
            fh.write(f"{fmt(lo)},{fmt(hi)},{int(c)}\n")


def write_bound_table(path, cmp: BoundComparison) -> None:
    with open(path, "w") as fh:
        fh.write("p,bound_standard,bound_bifi,difference\n")
        for p, s, b, d in zip(cmp.p, cmp.standard, cmp.bifi, cmp.difference):
            fh.write(f"{int(p)},{fmt(s)},{fmt(b)},{fmt(d)}\n")


def write_errors(path, errors) -> None:
    Path(path).write_text("realization,relative_rmse\n" + "".join(
        f"{i},{fmt(e)}\n" for i, e in enumerate(errors)))
