"""Uncertain-input samplers and measurement noise."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError

N_KL = 25

# example id -> (column names, sampler(rng, n))
_SAMPLERS = {
    "duffing-I": (
        ["beta", "omega"],
        lambda rng, n: np.column_stack([rng.uniform(0.5, 2.5, n), rng.uniform(1.5, 2.5, n)]),
    ),
    "duffing-II": (
        ["omega"],
        lambda rng, n: rng.uniform(1.5, 2.5, (n, 1)),
    ),
    "heat-I": (
        [f"xi_z{k}" for k in range(N_KL)] + ["xi_q"],
        lambda rng, n: rng.standard_normal((n, N_KL + 1)),
    ),
    "heat-II": (
        ["xi_q"],
        lambda rng, n: rng.standard_normal((n, 1)),
    ),
}

EXAMPLES = tuple(_SAMPLERS)


def uncertain_names(example: str) -> list[str]:
    try:
        return list(_SAMPLERS[example][0])
    except KeyError:
        raise ContractError(f"unknown example {example!r}; expected one of {EXAMPLES}") from None


def sample_uncertain_inputs(example: str, n: int, seed) -> np.ndarray:
    """i.i.d. draws of the uncertain variables, one realization per row.

    duffing-I: (beta, omega) ~ U[0.5, 2.5] x U[1.5, 2.5]
    duffing-II: omega ~ U[1.5, 2.5]
    heat-I: 25 KL coefficients followed by xi_Q, all standard normal
    heat-II: xi_Q ~ N(0, 1)
    """
    if n <= 0:
        raise ContractError(f"n must be positive, got {n}")
    names = uncertain_names(example)
    rng = np.random.default_rng(seed)
    xi = _SAMPLERS[example][1](rng, n)
    assert xi.shape == (n, len(names))
    return xi


def add_noise(targets, level: float = 0.05, seed=0) -> np.ndarray:
    """Additive Gaussian noise with standard deviation ``level * std(targets)``."""
    if level < 0:
        raise ContractError(f"noise level must be non-negative, got {level}")
    y = np.asarray(targets, dtype=np.float64)
    if level == 0:
        return y.copy()
    rng = np.random.default_rng(seed)
    return y + level * y.std() * rng.standard_normal(y.shape)
