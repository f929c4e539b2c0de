"""Stacked DeepONet: branch MLP, trunk MLP and a trainable bias.

For branch input ``f`` (the input function sampled at ``m`` sensors) and trunk
input ``y`` the network returns::

    G(f)(y) = c0 + sum_i c_i(f) * psi_i(y)

Inputs are affinely rescaled to [-1, 1] per column and the output is mapped
back through a stored mean/scale, both fitted on the training set.  With the
default identity normalizers the expression above is evaluated verbatim.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .data import DatasetBundle
from .errors import ContractError, DimensionError, DivergenceError, ParseError, SpecError
from .nn import AdamState, Mlp, MlpSpec, adam_step, forward, init_mlp, mlp_from_record, mlp_to_record

logger = logging.getLogger(__name__)

MODEL_FORMAT = "bifionet-deeponet/1"


@dataclass
class SensorGrid:
    """Fixed locations at which the branch input function is sampled."""

    locations: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.float64)
        self.locations = loc[:, None] if loc.ndim == 1 else loc

    @property
    def m(self) -> int:
        return self.locations.shape[0]

    @classmethod
    def equispaced(cls, lo: float, hi: float, m: int) -> "SensorGrid":
        return cls(np.linspace(lo, hi, m))


@dataclass
class Affine:
    """Per-column map ``(x - center) / scale``."""

    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, n: int) -> "Affine":
        return cls(np.zeros(n), np.ones(n))

    @classmethod
    def to_unit_box(cls, x: np.ndarray) -> "Affine":
        """Map each column's training range onto [-1, 1]; constant columns go to 0."""
        lo, hi = x.min(axis=0), x.max(axis=0)
        half = 0.5 * (hi - lo)
        half = np.where(half > 0, half, 1.0)
        return cls(0.5 * (hi + lo), half)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) / self.scale


@dataclass
class DeepONet:
    branch: Mlp
    trunk: Mlp
    c0: Tensor
    sensors: SensorGrid | None = None
    branch_norm: Affine | None = None
    trunk_norm: Affine | None = None
    out_mean: float = 0.0
    out_scale: float = 1.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.branch.spec.output_dim != self.trunk.spec.output_dim:
            raise SpecError(
                f"branch output {self.branch.spec.output_dim} != trunk output {self.trunk.spec.output_dim}"
            )
        if self.sensors is not None and self.sensors.m != self.m:
            raise SpecError(f"sensor grid has {self.sensors.m} locations but branch expects {self.m}")
        if self.branch_norm is None:
            self.branch_norm = Affine.identity(self.m)
        if self.trunk_norm is None:
            self.trunk_norm = Affine.identity(self.trunk_dim)

    @property
    def p(self) -> int:
        return self.branch.spec.output_dim

    @property
    def m(self) -> int:
        return self.branch.spec.input_dim

    @property
    def trunk_dim(self) -> int:
        return self.trunk.spec.input_dim

    def parameters(self) -> list[Tensor]:
        return [*self.branch.parameters(), *self.trunk.parameters(), self.c0]

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.zero_grad()

    def predict(self, branch_in, trunk_in, index=None) -> np.ndarray:
        return onet_forward(self, branch_in, trunk_in, index).data.copy()


def build_deeponet(
    m: int,
    trunk_dim: int,
    branch_hidden: Sequence[int] = (40, 40, 40),
    trunk_hidden: Sequence[int] = (40, 40),
    p: int = 20,
    seed: int = 0,
    sensors: SensorGrid | None = None,
) -> DeepONet:
    ss = np.random.SeedSequence(seed).spawn(2)
    branch = init_mlp(MlpSpec(m, tuple(branch_hidden), p), int(ss[0].generate_state(1)[0]))
    trunk = init_mlp(MlpSpec(trunk_dim, tuple(trunk_hidden), p), int(ss[1].generate_state(1)[0]))
    return DeepONet(branch, trunk, Tensor(np.zeros(1), requires_grad=True, name="c0"), sensors)


def fit_normalization(net: DeepONet, dataset: DatasetBundle) -> DeepONet:
    """Fit input rescaling and output mean/scale on a training bundle."""
    net.branch_norm = Affine.to_unit_box(dataset.branch)
    net.trunk_norm = Affine.to_unit_box(dataset.trunk)
    net.out_mean = float(dataset.target.mean())
    sd = float(dataset.target.std())
    net.out_scale = sd if sd > 0 else 1.0
    return net


def _check_inputs(net: DeepONet, branch_in: np.ndarray, trunk_in: np.ndarray, index) -> None:
    if branch_in.ndim != 2 or branch_in.shape[1] != net.m:
        raise DimensionError(f"branch input must be [batch x {net.m}], got {branch_in.shape}")
    if trunk_in.ndim != 2 or trunk_in.shape[1] != net.trunk_dim:
        raise DimensionError(f"trunk input must be [batch x {net.trunk_dim}], got {trunk_in.shape}")
    rows = branch_in.shape[0] if index is None else len(index)
    if rows != trunk_in.shape[0]:
        raise DimensionError(f"batch mismatch: {rows} branch rows vs {trunk_in.shape[0]} trunk rows")


def onet_forward(net: DeepONet, branch_in, trunk_in, index=None) -> Tensor:
    """Evaluate the operator for aligned rows.

    If ``index`` is given, ``branch_in`` holds one row per input function and
    row ``k`` of the output pairs ``branch_in[index[k]]`` with ``trunk_in[k]``;
    the branch network is then evaluated once per function.
    """
    b = np.asarray(branch_in.data if isinstance(branch_in, Tensor) else branch_in, dtype=np.float64)
    t = np.asarray(trunk_in.data if isinstance(trunk_in, Tensor) else trunk_in, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    _check_inputs(net, b, t, index)
    coeffs = forward(net.branch, Tensor(net.branch_norm.apply(b)))
    if index is not None:
        coeffs = ad.take_rows(coeffs, index)
    basis = forward(net.trunk, Tensor(net.trunk_norm.apply(t)))
    out = ad.add(ad.sum_rows(ad.mul(coeffs, basis)), net.c0)
    if net.out_scale != 1.0:
        out = ad.scale(out, net.out_scale)
    if net.out_mean != 0.0:
        out = ad.add(out, Tensor(np.array(net.out_mean)))
    return out


def onet_loss(net: DeepONet, dataset: DatasetBundle, rows=None) -> Tensor:
    """Mean squared error over all (function, location) pairs."""
    if dataset.n_rows == 0:
        raise ContractError("empty dataset")
    if rows is None:
        pred = onet_forward(net, dataset.branch, dataset.trunk, dataset.index)
        target = dataset.target
    else:
        pred = onet_forward(net, dataset.branch, dataset.trunk[rows], dataset.index[rows])
        target = dataset.target[rows]
    return ad.mse(pred, Tensor(target))


@dataclass
class TrainConfig:
    epochs: int = 5000
    lr: float = 1e-3
    batch: int | None = None
    seed: int = 0
    log_every: int = 100


@dataclass
class TrainReport:
    epochs: list[int] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None


def train(net: DeepONet, dataset: DatasetBundle, config: TrainConfig, state: AdamState | None = None) -> TrainReport:
    """Minimize :func:`onet_loss` with Adam; full batch unless ``config.batch`` is set."""
    if config.epochs < 0 or config.lr <= 0 or (config.batch is not None and config.batch <= 0):
        raise ContractError(f"invalid training config {config}")
    if dataset.n_rows == 0:
        raise ContractError("empty dataset")
    params = net.parameters()
    if state is None:
        state = AdamState.for_params(params, learning_rate=config.lr)
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    n = dataset.n_rows
    log_every = max(1, int(config.log_every))
    full_batch = config.batch is None or config.batch >= n

    for epoch in range(1, config.epochs + 1):
        if full_batch:
            batches = [None]
        else:
            perm = rng.permutation(n)
            batches = [perm[i:i + config.batch] for i in range(0, n, config.batch)]
        epoch_loss = 0.0
        for rows in batches:
            with Tape() as tape:
                loss = onet_loss(net, dataset, rows)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
            ad.backward(loss, tape)
            adam_step(params, [p.grad for p in params], state)
            net.zero_grad()
            weight = 1.0 if rows is None else len(rows) / n
            epoch_loss += weight * value
        if epoch % log_every == 0 or epoch == config.epochs:
            report.epochs.append(epoch)
            report.losses.append(epoch_loss)
            logger.debug("epoch %d loss %.6e", epoch, epoch_loss)
    return report


@dataclass(frozen=True)
class ArchConfig:
    width: int
    branch_depth: int
    trunk_depth: int
    p: int


@dataclass
class ArchSearchResult:
    chosen: ArchConfig
    trace: list[tuple[ArchConfig, float]]


def select_architecture(
    candidate_widths: Sequence[int],
    candidate_depths: Sequence,
    candidate_p: Sequence[int],
    train_fn: Callable[[ArchConfig], object],
    val_fn: Callable[[object], float],
    max_width: int = 100,
) -> ArchSearchResult:
    """Grow width, then depth, then p, stopping each stage once validation error stops falling.

    Depth candidates are either ints (same hidden-layer count for branch and
    trunk) or ``(branch_depth, trunk_depth)`` pairs.  p candidates larger than
    the chosen width are skipped.
    """
    widths = [w for w in candidate_widths if w <= max_width]
    depths = [d if isinstance(d, tuple) else (d, d) for d in candidate_depths]
    if not widths or not depths or not candidate_p:
        raise ContractError("candidate lists must be non-empty")
    trace: list[tuple[ArchConfig, float]] = []
    cache: dict[ArchConfig, float] = {}

    def score(cfg: ArchConfig) -> float:
        if cfg not in cache:
            cache[cfg] = float(val_fn(train_fn(cfg)))
            trace.append((cfg, cache[cfg]))
        return cache[cfg]

    def grow(configs: list[ArchConfig]) -> ArchConfig:
        best, best_err = configs[0], score(configs[0])
        for cfg in configs[1:]:
            err = score(cfg)
            if not err < best_err:
                break
            best, best_err = cfg, err
        return best

    p0 = candidate_p[0]
    best = grow([ArchConfig(w, depths[0][0], depths[0][1], p0) for w in widths])
    best = grow([ArchConfig(best.width, bd, td, p0) for bd, td in depths])
    ps = [p for p in candidate_p if p <= best.width] or [p0]
    best = grow([ArchConfig(best.width, best.branch_depth, best.trunk_depth, p) for p in ps])
    return ArchSearchResult(best, trace)


def model_to_record(net: DeepONet) -> dict:
    return {
        "format": MODEL_FORMAT,
        "branch": mlp_to_record(net.branch),
        "trunk": mlp_to_record(net.trunk),
        "c0": float(net.c0.data[0]),
        "sensors": None if net.sensors is None else net.sensors.locations.tolist(),
        "branch_norm": [net.branch_norm.center.tolist(), net.branch_norm.scale.tolist()],
        "trunk_norm": [net.trunk_norm.center.tolist(), net.trunk_norm.scale.tolist()],
        "out_mean": net.out_mean,
        "out_scale": net.out_scale,
        "info": net.info,
    }


def model_from_record(rec: dict) -> DeepONet:
    if rec.get("format") != MODEL_FORMAT:
        raise ParseError(f"unsupported model format {rec.get('format')!r}")
    sensors = None if rec["sensors"] is None else SensorGrid(np.array(rec["sensors"], dtype=np.float64))
    return DeepONet(
        mlp_from_record(rec["branch"]),
        mlp_from_record(rec["trunk"]),
        Tensor(np.array([rec["c0"]]), requires_grad=True, name="c0"),
        sensors,
        Affine(*(np.array(a, dtype=np.float64) for a in rec["branch_norm"])),
        Affine(*(np.array(a, dtype=np.float64) for a in rec["trunk_norm"])),
        float(rec["out_mean"]),
        float(rec["out_scale"]),
        dict(rec.get("info", {})),
    )


def save_model(net: DeepONet, path) -> None:
    Path(path).write_text(json.dumps(model_to_record(net)))


def load_model(path) -> DeepONet:
    try:
        rec = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), path, exc.lineno) from None
    return model_from_record(rec)
