import numpy as np
import pytest

from bifionet.errors import ContractError, DimensionError
from bifionet.windfarm import (
    WindLowFidelity,
    gaussian_wake_power,
    jensen_wake_power,
    sample_wind_inputs,
    turbine_layout,
    wind_hifi_samples,
)

POS = turbine_layout()
# rows 0/1 share x = 0; mirroring y about the farm centreline swaps partner turbines
MIRROR = [1, 0, 3, 2, 5, 4]


def _free_stream_mw(U, yaw_deg=0.0, exponent=2.0):
    return 0.5 * 1.225 * np.pi * 63.0**2 * 0.45 * U**3 * np.cos(np.radians(yaw_deg)) ** exponent / 1e6


def test_layout():
    assert POS.shape == (6, 2)
    np.testing.assert_array_equal(POS[:, 0], [0, 0, 474, 474, 948, 948])
    np.testing.assert_array_equal(POS[:, 1], [0, 387, 0, 387, 0, 387])


@pytest.mark.parametrize("model, exponent", [(gaussian_wake_power, 1.88), (jensen_wake_power, 2.0)])
def test_front_row_sees_free_stream(model, exponent):
    p = model([8.0, 0.0, 10.0])
    np.testing.assert_allclose(p[:2], _free_stream_mw(8.0, 10.0, exponent), rtol=1e-14)
    assert np.all(p[2:] < p[0])


def test_jensen_deficit_at_one_spacing():
    p = jensen_wake_power([9.0, 0.0, 0.0])
    a = (1 - np.sqrt(0.2)) / (1 + 2 * 0.075 * 474 / 126) ** 2
    assert p[2] == pytest.approx(_free_stream_mw(9.0 * (1 - a)), rel=1e-13)


def test_wide_cross_wind_removes_wakes():
    # wind along +y: column partners are 387 m apart, other columns well outside any top-hat wake
    p = jensen_wake_power([7.0, 90.0, 0.0])
    np.testing.assert_allclose(p[[0, 2, 4]], _free_stream_mw(7.0), rtol=1e-14)
    assert np.all(p[[1, 3, 5]] < p[0])


@pytest.mark.parametrize("model", [gaussian_wake_power, jensen_wake_power])
def test_mirror_symmetry(model):
    a = model([8.0, 12.0, 15.0])
    b = model([8.0, -12.0, -15.0])
    np.testing.assert_allclose(a, b[MIRROR], rtol=1e-12)


def test_models_disagree_but_stay_close():
    xi = sample_wind_inputs(50, 0)
    hi = np.array([gaussian_wake_power(x) for x in xi])
    lo = np.array([jensen_wake_power(x) for x in xi])
    rel = np.linalg.norm(hi - lo) / np.linalg.norm(hi)
    assert 1e-3 < rel < 0.3


def test_sampling_bounds_and_determinism():
    xi = sample_wind_inputs(1000, 3)
    assert xi.shape == (1000, 3)
    assert np.all((xi[:, 0] >= 6) & (xi[:, 0] <= 10))
    assert np.all(np.abs(xi[:, 1]) <= 20) and np.all(np.abs(xi[:, 2]) <= 25)
    np.testing.assert_array_equal(xi, sample_wind_inputs(1000, 3))
    with pytest.raises(ContractError):
        sample_wind_inputs(0, 0)


def test_lofi_solver_at_turbines():
    lofi = WindLowFidelity()
    xi = [8.5, -5.0, 3.0]
    np.testing.assert_array_equal(lofi.evaluate(xi, POS[::-1]), jensen_wake_power(xi)[::-1])
    with pytest.raises(ContractError):
        lofi.evaluate(xi, [[10.0, 10.0]])
    with pytest.raises(DimensionError):
        lofi.evaluate([8.0, 0.0], POS)


def test_hifi_samples():
    s = wind_hifi_samples(4, 1)
    assert s.hifi.values.shape == (4, 6)
    np.testing.assert_array_equal(s.hifi.values[2], gaussian_wake_power(s.hifi.xi[2]))
