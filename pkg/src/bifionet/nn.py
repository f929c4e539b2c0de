"""Multi-layer perceptrons with ELU activations and the Adam optimizer."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, DivergenceError, ParseError, SpecError

MLP_FORMAT = "bifionet-mlp/1"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths of a fully connected network.

    Hidden layers use ELU; the final layer is linear.
    """

    input_dim: int
    hidden_layers: tuple[int, ...]
    output_dim: int
    activation: str = "elu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        dims = self.dims
        if any(d <= 0 for d in dims):
            raise SpecError(f"all layer dimensions must be positive, got {dims}")
        if self.activation != "elu":
            raise SpecError(f"unsupported activation {self.activation!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (int(self.input_dim), *self.hidden_layers, int(self.output_dim))

    def n_params(self) -> int:
        d = self.dims
        return sum(d[i + 1] * d[i] + d[i + 1] for i in range(len(d) - 1))


@dataclass
class Mlp:
    spec: MlpSpec
    weights: list[Tensor]
    biases: list[Tensor]

    def __post_init__(self):
        d = self.spec.dims
        if len(self.weights) != len(d) - 1 or len(self.biases) != len(d) - 1:
            raise SpecError("layer count does not match spec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (d[i + 1], d[i]) or b.shape != (d[i + 1],):
                raise SpecError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} inconsistent with spec dims {d}"
                )

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def __call__(self, x: Tensor) -> Tensor:
        return forward(self, x)


def init_mlp(spec: MlpSpec, seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    d = spec.dims
    weights, biases = [], []
    for i in range(len(d) - 1):
        fan_in, fan_out = d[i], d[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        weights.append(Tensor(w, requires_grad=True, name=f"W{i}"))
        biases.append(Tensor(np.zeros(fan_out), requires_grad=True, name=f"b{i}"))
    return Mlp(spec, weights, biases)


def forward(mlp: Mlp, x: Tensor) -> Tensor:
    """Affine + ELU for each hidden layer, then a linear output layer."""
    if x.data.ndim != 2:
        raise DimensionError(f"MLP input must be [batch x {mlp.spec.input_dim}], got shape {x.shape}")
    h = x
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        if h.shape[1] != w.shape[1]:
            raise DimensionError(f"layer {i}: expected {w.shape[1]} input columns, got {h.shape[1]}")
        h = ad.linear(h, w, b)
        if i < last:
            h = ad.elu(h)
    return h


@dataclass
class AdamState:
    """Moment estimates for bias-corrected Adam (Kingma & Ba)."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        st = cls(**kw)
        st.first_moment = [np.zeros(p.shape) for p in params]
        st.second_moment = [np.zeros(p.shape) for p in params]
        return st


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState) -> None:
    """Update ``params`` in place and advance ``state.step_count`` by one."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise DimensionError(
            f"adam_step: {len(params)} params, {len(grads)} grads, {len(state.first_moment)} moment slots"
        )
    for i, (p, g, m) in enumerate(zip(params, grads, state.first_moment)):
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(f"adam_step: parameter {i} ({p.name or 'unnamed'}) has shape {p.shape}, gradient {g.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {i} ({p.name or 'unnamed'})")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    step = state.learning_rate / (1.0 - b1**t)
    corr2 = 1.0 / (1.0 - b2**t)
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= step * m / (np.sqrt(v * corr2) + state.epsilon)


def mlp_to_record(mlp: Mlp) -> dict:
    s = mlp.spec
    return {
        "format": MLP_FORMAT,
        "spec": {
            "input_dim": s.input_dim,
            "hidden_layers": list(s.hidden_layers),
            "output_dim": s.output_dim,
            "activation": s.activation,
        },
        "weights": [w.data.tolist() for w in mlp.weights],
        "biases": [b.data.tolist() for b in mlp.biases],
    }


def mlp_from_record(rec: dict) -> Mlp:
    if rec.get("format") != MLP_FORMAT:
        raise ParseError(f"unsupported MLP record format {rec.get('format')!r}")
    s = rec["spec"]
    spec = MlpSpec(s["input_dim"], tuple(s["hidden_layers"]), s["output_dim"], s.get("activation", "elu"))
    weights = [Tensor(np.array(w, dtype=np.float64).reshape(-1, d), requires_grad=True)
               for w, d in zip(rec["weights"], spec.dims[:-1])]
    biases = [Tensor(np.array(b, dtype=np.float64), requires_grad=True) for b in rec["biases"]]
    return Mlp(spec, weights, biases)


def save_mlp(mlp: Mlp, path) -> None:
    Path(path).write_text(json.dumps(mlp_to_record(mlp)))


def load_mlp(path) -> Mlp:
    return mlp_from_record(json.loads(Path(path).read_text()))
