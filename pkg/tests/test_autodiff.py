import threading

import numpy as np
import pytest

from bifionet import autodiff as ad
from bifionet.autodiff import Tape, Tensor, backward
from bifionet.errors import ContractError, DimensionError
from bifionet.nn import MlpSpec, forward, init_mlp
from oracles import central_difference


def test_matmul_identity():
    a = Tensor(np.eye(2))
    b = Tensor([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(ad.matmul(a, b).data, b.data)


def test_matmul_hand_product():
    out = ad.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[5.0], [6.0]]))
    np.testing.assert_array_equal(out.data, [[17.0], [39.0]])


def test_matmul_shape_mismatch_names_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(4, 2\)"):
        ad.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_matmul_backward_rules():
    a = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    b = Tensor(np.arange(12.0).reshape(3, 4) / 10, requires_grad=True)
    with Tape() as tape:
        c = ad.matmul(a, b)
        loss = ad.mean(c)
    backward(loss, tape)
    dc = np.full((2, 4), 1 / 8)
    np.testing.assert_allclose(a.grad, dc @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ dc)


@pytest.mark.parametrize(
    "op, a, b, expected",
    [
        (ad.add, [1.0, 2.0], [0.0, 0.0], [1.0, 2.0]),
        (ad.mul, [2.0, 3.0], [4.0, 5.0], [8.0, 15.0]),
        (ad.sub, [2.0, 3.0], [4.0, 5.0], [-2.0, -2.0]),
    ],
)
def test_elementwise_values(op, a, b, expected):
    np.testing.assert_array_equal(op(Tensor(a), Tensor(b)).data, expected)


def test_scale_and_square():
    np.testing.assert_array_equal(ad.scale(Tensor([1.0, -1.0]), 2.5).data, [2.5, -2.5])
    np.testing.assert_array_equal(ad.square(Tensor([3.0, -2.0])).data, [9.0, 4.0])


def test_scalar_broadcast_and_rejection():
    np.testing.assert_array_equal(ad.add(Tensor([1.0, 2.0]), 1.0).data, [2.0, 3.0])
    with pytest.raises(DimensionError):
        ad.add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))
    with pytest.raises(DimensionError):
        ad.mul(Tensor(np.zeros((2, 2))), Tensor(np.zeros(2)))


def test_elu_values_and_slope():
    x = Tensor([0.0, 2.0, -1.0], requires_grad=True)
    with Tape() as tape:
        y = ad.elu(x)
        loss = ad.mean(y)
    np.testing.assert_allclose(y.data, [0.0, 2.0, np.exp(-1.0) - 1.0], rtol=0, atol=1e-15)
    assert y.data[2] == pytest.approx(-0.63212, abs=1e-5)
    backward(loss, tape)
    np.testing.assert_allclose(x.grad, np.array([1.0, 1.0, np.exp(-1.0)]) / 3)


def test_mse_values():
    assert ad.mse(Tensor([1.0, 2.0]), Tensor([1.0, 2.0])).item() == 0.0
    assert ad.mse(Tensor([1.0, 1.0]), Tensor([0.0, 0.0])).item() == 1.0
    assert ad.mse(Tensor([3.0]), Tensor([1.0])).item() == 4.0
    with pytest.raises(DimensionError):
        ad.mse(Tensor([1.0, 2.0]), Tensor([1.0]))


def test_backward_square():
    x = Tensor([3.0], requires_grad=True)
    with Tape() as tape:
        loss = ad.mean(ad.square(x))
    backward(loss, tape)
    assert x.grad[0] == 6.0


def test_backward_accumulates():
    x = Tensor([3.0, -1.0], requires_grad=True)
    with Tape() as tape:
        loss = ad.mse(ad.scale(x, 2.0), Tensor([0.0, 1.0]))
    backward(loss, tape)
    first = x.grad.copy()
    backward(loss, tape)
    np.testing.assert_array_equal(x.grad, 2 * first)
    x.zero_grad()
    assert x.grad is None


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = ad.square(x)
    with pytest.raises(ContractError):
        backward(y, tape)


def test_backward_rejects_foreign_tape():
    x = Tensor([1.0], requires_grad=True)
    with Tape():
        loss = ad.mean(ad.square(x))
    with pytest.raises(ContractError):
        backward(loss, Tape())


def test_tensor_method_backward():
    x = Tensor([2.0], requires_grad=True)
    with Tape():
        loss = ad.mean(x * x)
    loss.backward()
    assert x.grad[0] == 4.0


def test_take_rows_scatter_add():
    a = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    with Tape() as tape:
        g = ad.take_rows(a, np.array([0, 0, 2]))
        loss = ad.mean(g)
    backward(loss, tape)
    np.testing.assert_allclose(a.grad, np.array([[2, 2], [0, 0], [1, 1]]) / 6)


def _mlp_loss_and_params(seed, dims):
    rng = np.random.default_rng(seed)
    spec = MlpSpec(dims[0], tuple(dims[1:-1]), dims[-1])
    mlp = init_mlp(spec, seed)
    x = Tensor(rng.standard_normal((5, dims[0])))
    y = Tensor(rng.standard_normal(5 * dims[-1]))

    def loss_value():
        out = forward(mlp, x)
        return ad.mse(Tensor(out.data.reshape(-1)), y).item()

    return mlp, x, y, loss_value


def test_two_layer_mlp_matches_finite_differences():
    mlp, x, y, loss_value = _mlp_loss_and_params(3, (3, 6, 2))
    with Tape() as tape:
        out = forward(mlp, x)
        loss = ad.mse(ad.sum_rows(out), Tensor(y.data[:5]))
    backward(loss, tape)

    def f():
        return ad.mse(ad.sum_rows(forward(mlp, x)), Tensor(y.data[:5])).item()

    for p in mlp.parameters():
        fd = central_difference(f, p.data)
        np.testing.assert_allclose(p.grad, fd, rtol=1e-4, atol=1e-6)


def test_separate_tapes_on_separate_threads():
    results = {}

    def work(k):
        x = Tensor([float(k)], requires_grad=True)
        with Tape() as tape:
            loss = ad.mean(ad.square(x))
        backward(loss, tape)
        results[k] = x.grad[0]

    threads = [threading.Thread(target=work, args=(k,)) for k in range(1, 5)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {k: 2.0 * k for k in range(1, 5)}


def test_forward_is_deterministic():
    mlp = init_mlp(MlpSpec(4, (8, 8), 3), 1)
    x = Tensor(np.random.default_rng(0).standard_normal((7, 4)))
    a = forward(mlp, x).data
    b = forward(mlp, x).data
    assert a.tobytes() == b.tobytes()
