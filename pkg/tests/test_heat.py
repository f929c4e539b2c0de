from dataclasses import replace

import numpy as np
import pytest

from bifionet.errors import ContractError, ConvergenceError
from bifionet.physics.heat import (
    HeatModelConfig,
    Lattice,
    default_lattice,
    gaussian_source,
    heat_lofi_solve,
    heat_solve,
)

CFG = HeatModelConfig()


@pytest.fixture(scope="module")
def lattice():
    return default_lattice(CFG)


@pytest.fixture(scope="module")
def lofi_pair(lattice):
    return heat_lofi_solve(CFG, "I", lattice), heat_lofi_solve(CFG, "II", lattice)


def test_l_shape_geometry(lattice):
    n = int(round(CFG.plate_size / CFG.h)) + 1
    half = (n - 1) // 2
    assert lattice.n_nodes == n * n - half * half
    assert not lattice.contains([[2.5, 2.5]])[0]
    assert lattice.contains([[1.5, 1.5], [0.0, 3.0], [3.0, 0.0]]).all()
    assert lattice.areas.sum() == pytest.approx(CFG.plate_size**2 * 0.75)
    np.testing.assert_array_equal(lattice.nodes[lattice.left_nodes, 0], 0.0)


def test_constant_equilibrium(lattice):
    cfg = replace(CFG, T_left=CFG.T_ambient)
    sol = heat_solve(cfg, CFG.k0, np.zeros(lattice.n_nodes), lattice)
    np.testing.assert_allclose(sol.T, CFG.T_ambient, rtol=0, atol=1e-9)


def test_linear_strip_matches_dense_three_point_scheme():
    h, n_cells = 0.05, 40
    cfg = replace(CFG, emissivity=0.0, h=h)
    strip = Lattice.rectangle(n_cells * h, h, h)
    k, q = 250.0, 1200.0
    sol = heat_solve(cfg, k, np.full(strip.n_nodes, q), strip)
    # Textbook 1-D scheme: -h_t k T'' + 2 h_c T = b, T(0) = T_left, ghost-node Neumann at x = L.
    n = n_cells + 1
    c = cfg.h_t * k / h**2
    A = np.zeros((n, n))
    rhs = np.full(n, 2 * cfg.h_c * cfg.T_ambient + q)
    A[0, 0], rhs[0] = 1.0, cfg.T_left
    for i in range(1, n):
        A[i, i] = 2 * c + 2 * cfg.h_c
        A[i, i - 1] = -c if i < n - 1 else -2 * c
        if i < n - 1:
            A[i, i + 1] = -c
    ref = np.linalg.solve(A, rhs)
    ix = strip.node_ij[:, 0]
    np.testing.assert_allclose(sol.T, ref[ix], rtol=0, atol=1e-8)
    assert sol.iterations == 1


def test_symmetric_problem_has_symmetric_solution():
    h = 0.1
    rect = Lattice.rectangle(2.0, 1.0, h)
    y = rect.nodes[:, 1]
    source = CFG.Q0 * np.exp(-(rect.nodes[:, 0] ** 2 + (y - 0.5) ** 2))
    k = CFG.k0 + np.cos(np.pi * (y - 0.5))
    T = heat_solve(CFG, k, source, rect).T
    ny = int(round(1.0 / h))
    mirror = rect.node_id[rect.node_ij[:, 0], ny - rect.node_ij[:, 1]]
    np.testing.assert_allclose(T, T[mirror], rtol=0, atol=1e-10)


def test_dirichlet_edge_and_positive_source_response(lofi_pair, lattice):
    T1, _ = lofi_pair
    np.testing.assert_array_equal(T1.T[lattice.left_nodes], CFG.T_left)
    assert T1.residuals[-1] < CFG.newton_tol
    assert T1.T.max() > CFG.T_ambient


def test_lofi_mode_one_is_plain_solve(lofi_pair, lattice):
    T1, _ = lofi_pair
    direct = heat_solve(CFG, CFG.k0, gaussian_source(lattice.nodes, CFG.Q0), lattice)
    np.testing.assert_array_equal(T1.T, direct.T)


def test_lofi_mode_two_is_linear(lofi_pair):
    _, T2 = lofi_pair
    assert T2.iterations == 1


def test_dropping_radiation_heats_the_hot_region(lofi_pair):
    T1, T2 = lofi_pair
    hot = T1.T >= CFG.T_ambient
    assert hot.sum() > 100
    assert np.all(T2.T[hot] >= T1.T[hot])


@pytest.mark.xfail(strict=True, reason="below ambient, radiation heats the plate, so dropping it cools those nodes")
def test_dropping_radiation_never_cools(lofi_pair):
    T1, T2 = lofi_pair
    assert np.all(T2.T >= T1.T)


def test_more_emissivity_does_not_raise_hot_temperatures(lattice):
    src = gaussian_source(lattice.nodes, CFG.Q0)
    lo = heat_solve(CFG, CFG.k0, src, lattice).T
    hi = heat_solve(replace(CFG, emissivity=0.05), CFG.k0, src, lattice).T
    hot = (lo > CFG.T_ambient) & (hi > CFG.T_ambient)
    assert hot.any()
    assert np.all(hi[hot] <= lo[hot] + 1e-9)


def _max_change(coarse_h, fine_h, mask_radius=0.0):
    coarse_cfg, fine_cfg = replace(CFG, h=coarse_h), replace(CFG, h=fine_h)
    coarse = heat_lofi_solve(coarse_cfg, "I")
    fine_lat = default_lattice(fine_cfg)
    fine = heat_lofi_solve(fine_cfg, "I", fine_lat)
    coarse_lat = default_lattice(coarse_cfg)
    on_fine = fine_lat.interpolate(fine.T, coarse_lat.nodes)
    corner = np.array([CFG.plate_size / 2] * 2)
    keep = np.linalg.norm(coarse_lat.nodes - corner, axis=1) >= mask_radius
    return np.max(np.abs(on_fine - coarse.T)[keep])


@pytest.mark.xfail(strict=True, reason="re-entrant corner singularity: 2x refinement from h=0.05 moves nodes by ~0.3 K")
def test_refinement_changes_default_grid_below_tenth_kelvin():
    assert _max_change(0.05, 0.025) < 0.1


def test_refinement_converges_away_from_reentrant_corner():
    assert _max_change(0.025, 0.0125, mask_radius=0.25) < 0.1


def test_negative_conductivity_rejected(lattice):
    with pytest.raises(ContractError):
        heat_solve(CFG, -1.0, 0.0, lattice)


def test_non_convergence_carries_history(lattice):
    with pytest.raises(ConvergenceError) as err:
        heat_solve(replace(CFG, newton_max_iter=1), CFG.k0, gaussian_source(lattice.nodes, CFG.Q0), lattice)
    assert len(err.value.history) == 2


def test_interpolation_reproduces_bilinear_field(lattice):
    f = 2.0 + 3.0 * lattice.nodes[:, 0] - lattice.nodes[:, 1]
    pts = np.array([[0.123, 0.456], [1.49, 2.9], [2.95, 0.01]])
    np.testing.assert_allclose(lattice.interpolate(f, pts), 2.0 + 3.0 * pts[:, 0] - pts[:, 1], rtol=1e-12)
    with pytest.raises(ContractError):
        lattice.interpolate(f, [[2.9, 2.9]])
