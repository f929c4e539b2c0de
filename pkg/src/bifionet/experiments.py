"""Config-driven pipeline: generate bundles, train, evaluate, compare.

Run directory layout (``out``)::

    data/{train,val}_{bifi,standard}/   dataset bundles
    models/{bifi,standard}.json         trained DeepONets
    models/{bifi,standard}_loss.csv     loss traces
    eval/{bifi,standard}_*.csv|json     validation reports
    report.csv                          standard-vs-bifi comparison
    bound_{I,II}.csv                    reconstruction-bound curves
"""

from __future__ import annotations

import configparser
import json
import logging
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .analysis import bound_comparison, validation_report, write_bound_table, write_errors, write_histogram
from .bifidelity import (
    DuffingLowFidelity,
    HeatLowFidelity,
    HifiSamples,
    TrunkLayout,
    build_discrepancy_dataset,
    standard_baseline_dataset,
    xi_source,
)
from .data import DatasetBundle, fmt, load_bundle, read_table, save_bundle
from .deeponet import SensorGrid, TrainConfig, build_deeponet, fit_normalization, load_model, save_model, train
from .errors import ConfigError, DimensionError, ParseError, SolverError
from .physics.duffing import DuffingConfig, duffing_trajectories
from .physics.heat import (
    HeatModelConfig,
    conductivity,
    default_lattice,
    gaussian_source,
    heat_solve,
    rhs_field,
)
from .physics.kl import kl_build, kl_sample
from .physics.sampling import N_KL, add_noise, sample_uncertain_inputs, uncertain_names
from .windfarm import WindLowFidelity, wind_hifi_samples

logger = logging.getLogger(__name__)

EXAMPLES = ("duffing-I", "duffing-II", "heat-I", "heat-II", "external")
KINDS = ("bifi", "standard")


@dataclass
class Architecture:
    width: int = 40
    branch_depth: int = 3
    trunk_depth: int = 2
    p: int = 20
    m: int = 0  # 0: example default (Duffing 100 time points, heat = training locations)


@dataclass
class Training:
    epochs: int = 5000
    lr: float = 1e-3
    batch: int = 0  # 0: full batch
    seed: int = 0
    log_every: int = 100

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.lr, self.batch or None, self.seed, self.log_every)


@dataclass
class ExperimentConfig:
    example: str
    n_train: int
    n_val: int
    seed: int = 0
    out: str = "runs/default"
    noise: float = 0.0
    n_locations: int = 200
    n_train_locations: int = 100
    standard_rows: int = 0  # external/wind: high-fidelity realizations for the standard baseline
    bound_samples: int = 2000
    architecture: Architecture = field(default_factory=Architecture)
    training: Training = field(default_factory=Training)
    physics: dict = field(default_factory=dict)
    external: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; expected one of {EXAMPLES}")
        if self.n_train <= 0 or self.n_val <= 0:
            raise ConfigError("n_train and n_val must be positive")
        if self.example.startswith("heat") and not 0 < self.n_train_locations < self.n_locations:
            raise ConfigError("need 0 < n_train_locations < n_locations")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


# Per-example defaults; anything set in the config file overrides them.
DEFAULTS = {
    "duffing-I": dict(n_train=200, n_val=1000,
                      training=Training(epochs=8000, lr=3e-3, batch=500)),
    "duffing-II": dict(n_train=200, n_val=1000, noise=0.05,
                       training=Training(epochs=8000, lr=3e-3, batch=500)),
    "heat-I": dict(n_train=30, n_val=1000, n_train_locations=100,
                   training=Training(epochs=200, lr=1e-3)),
    "heat-II": dict(n_train=3, n_val=1000, n_train_locations=20,
                    training=Training(epochs=5000, lr=1e-3)),
    "external": dict(n_train=100, n_val=1000, standard_rows=103,
                     architecture=Architecture(width=100, p=60),
                     training=Training(epochs=5000, lr=1e-3)),
}


def default_config(example: str, **overrides) -> ExperimentConfig:
    if example not in DEFAULTS:
        raise ConfigError(f"unknown example {example!r}; expected one of {EXAMPLES}")
    kw = dict(DEFAULTS[example])
    kw["training"] = replace(kw.get("training", Training()))
    kw["architecture"] = replace(kw.get("architecture", Architecture()))
    kw.update(overrides)
    return ExperimentConfig(example=example, **kw)


def _coerce(cls, section: configparser.SectionProxy, base):
    out = {}
    types = {f.name: f.type for f in fields(cls)}
    for key, raw in section.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r} in [{section.name}]")
        conv = int if "int" in str(types[key]) else float
        try:
            out[key] = conv(raw)
        except ValueError:
            raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a valid {conv.__name__}") from None
    return replace(base, **out)


def load_config(path) -> ExperimentConfig:
    """Read an INI experiment file (sections: experiment, architecture, training, physics, external)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "experiment" not in parser or "example" not in parser["experiment"]:
        raise ConfigError(f"{path}: [experiment] section must set 'example'")
    exp = parser["experiment"]
    cfg = default_config(exp["example"].strip())
    simple = {"n_train": int, "n_val": int, "seed": int, "out": str, "noise": float, "n_locations": int,
              "n_train_locations": int, "standard_rows": int, "bound_samples": int}
    kw = {}
    for key, raw in exp.items():
        if key == "example":
            continue
        if key not in simple:
            raise ConfigError(f"{path}: unknown key {key!r} in [experiment]")
        try:
            kw[key] = simple[key](raw)
        except ValueError:
            raise ConfigError(f"{path}: [experiment] {key} = {raw!r} is not valid") from None
    if "architecture" in parser:
        kw["architecture"] = _coerce(Architecture, parser["architecture"], cfg.architecture)
    if "training" in parser:
        kw["training"] = _coerce(Training, parser["training"], cfg.training)
    if "physics" in parser:
        try:
            kw["physics"] = {k: float(v) for k, v in parser["physics"].items()}
        except ValueError as exc:
            raise ConfigError(f"{path}: [physics] {exc}") from None
    if "external" in parser:
        base = Path(path).parent
        kw["external"] = {k: str(base / v) for k, v in parser["external"].items()}
    return replace(cfg, **kw)


def _seeds(seed: int) -> dict[str, int]:
    names = ("xi_train", "xi_val", "noise", "locations", "extra")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


# ---------------------------------------------------------------- Duffing


def _duffing_base(cfg: ExperimentConfig) -> DuffingConfig:
    allowed = {f.name for f in fields(DuffingConfig)}
    bad = set(cfg.physics) - allowed
    if bad:
        raise ConfigError(f"unknown Duffing physics keys {sorted(bad)}")
    kw = {k: (int(v) if k == "n_out" else v) for k, v in cfg.physics.items()}
    return DuffingConfig(**kw)


def duffing_hifi(example: str, base: DuffingConfig, xi: np.ndarray) -> np.ndarray:
    """Displacement on the output grid for each realization of xi."""
    n = xi.shape[0]
    if example == "duffing-I":
        beta, omega = xi[:, 0], xi[:, 1]
    else:
        beta, omega = np.full(n, base.beta), xi[:, 0]
    return duffing_trajectories(base.alpha, beta, base.delta, base.gamma, omega, base.u0, base.v0,
                                base.t_end, base.dt, base.n_out)


def _duffing_bundles(cfg: ExperimentConfig) -> dict[str, DatasetBundle]:
    base = _duffing_base(cfg)
    seeds = _seeds(cfg.seed)
    mode = cfg.example.split("-")[1]
    names = uncertain_names(cfg.example)
    times = base.times
    m = cfg.architecture.m or base.n_out
    sensors = SensorGrid.equispaced(0.0, base.t_end, m)
    lofi = DuffingLowFidelity(mode, base, names)
    # parametric: trunk sees (t, xi); structural: trunk sees t only
    layout = TrunkLayout(tuple(range(len(names)))) if mode == "I" else TrunkLayout()
    meta = {"example": cfg.example, "sensors": sensors.locations.tolist()}
    out = {}
    for split, n in (("train", cfg.n_train), ("val", cfg.n_val)):
        xi = sample_uncertain_inputs(cfg.example, n, seeds[f"xi_{split}"])
        values = duffing_hifi(cfg.example, base, xi)
        if split == "train" and cfg.noise > 0:
            values = add_noise(values, cfg.noise, seeds["noise"])
        samples = HifiSamples(xi, times, values, names, ["t"])
        out[f"{split}_bifi"] = build_discrepancy_dataset(samples, lofi, sensors, layout, meta)
        out[f"{split}_standard"] = standard_baseline_dataset(
            samples, xi_source, None, layout, {"example": cfg.example}, branch_names=names)
    return out


# ---------------------------------------------------------------- heat


def _heat_config(cfg: ExperimentConfig) -> HeatModelConfig:
    allowed = {f.name for f in fields(HeatModelConfig)}
    bad = set(cfg.physics) - allowed
    if bad:
        raise ConfigError(f"unknown heat physics keys {sorted(bad)}")
    kw = {k: (int(v) if k == "newton_max_iter" else v) for k, v in cfg.physics.items()}
    return HeatModelConfig(**kw)


@lru_cache(maxsize=4)
def _kl_for(h: float, size: float):
    lattice = default_lattice(HeatModelConfig(h=h, plate_size=size))
    return kl_build(lattice.nodes, (0.5, 0.5), N_KL)


def heat_hifi(example: str, hcfg: HeatModelConfig, xi: np.ndarray, nodes_out: np.ndarray) -> np.ndarray:
    """Temperatures at node ids ``nodes_out`` for each realization; failures carry xi."""
    lattice = default_lattice(hcfg)
    field_kl = _kl_for(hcfg.h, hcfg.plate_size) if example == "heat-I" else None
    rows = []
    for j, x in enumerate(xi):
        if example == "heat-I":
            k = conductivity(hcfg, kl_sample(field_kl, x[:N_KL]))
            xi_q = x[N_KL]
        else:
            k, xi_q = hcfg.k0, x[0]
        try:
            sol = heat_solve(hcfg, k, gaussian_source(lattice.nodes, hcfg.Q0, xi_q), lattice)
        except ArithmeticError as exc:
            raise SolverError(f"heat solve failed for realization {j}: {exc}", xi=x, index=j) from exc
        rows.append(sol.T[nodes_out])
    return np.vstack(rows)


def measurement_nodes(hcfg: HeatModelConfig, n_locations: int, n_train: int, seed: int):
    """Random non-Dirichlet lattice nodes split into training and validation locations."""
    lattice = default_lattice(hcfg)
    free = np.setdiff1d(np.arange(lattice.n_nodes), lattice.left_nodes)
    if n_locations > free.size:
        raise ConfigError(f"asked for {n_locations} locations but only {free.size} free nodes exist")
    pick = np.random.default_rng(seed).choice(free, n_locations, replace=False)
    return pick[:n_train], pick[n_train:]


def _heat_bundles(cfg: ExperimentConfig) -> dict[str, DatasetBundle]:
    hcfg = _heat_config(cfg)
    seeds = _seeds(cfg.seed)
    mode = cfg.example.split("-")[1]
    lattice = default_lattice(hcfg)
    names = uncertain_names(cfg.example)
    train_nodes, val_nodes = measurement_nodes(hcfg, cfg.n_locations, cfg.n_train_locations, seeds["locations"])
    sensor_nodes = train_nodes
    if cfg.architecture.m and cfg.architecture.m != sensor_nodes.size:
        raise ConfigError(f"heat sensors are the {sensor_nodes.size} training locations; m={cfg.architecture.m}")
    sensors = SensorGrid(lattice.nodes[sensor_nodes])
    lofi = HeatLowFidelity(mode, hcfg, lattice)
    layout = TrunkLayout(tuple(range(len(names))))
    meta = {"example": cfg.example, "sensors": sensors.locations.tolist()}

    def source_rhs(x, locs):
        xi_q = x[-1]
        return rhs_field(hcfg, gaussian_source(locs, hcfg.Q0, xi_q))

    out = {}
    for split, n, nodes in (("train", cfg.n_train, train_nodes), ("val", cfg.n_val, val_nodes)):
        xi = sample_uncertain_inputs(cfg.example, n, seeds[f"xi_{split}"])
        values = heat_hifi(cfg.example, hcfg, xi, nodes)
        samples = HifiSamples(xi, lattice.nodes[nodes], values, names, ["x1", "x2"])
        out[f"{split}_bifi"] = build_discrepancy_dataset(samples, lofi, sensors, layout, meta)
        out[f"{split}_standard"] = standard_baseline_dataset(
            samples, source_rhs, sensors, layout, {"example": cfg.example})
    return out


# ---------------------------------------------------------------- wind toy


def _wind_bundles(cfg: ExperimentConfig) -> dict[str, DatasetBundle]:
    seeds = _seeds(cfg.seed)
    n_std = cfg.standard_rows or cfg.n_train
    if n_std < cfg.n_train:
        raise ConfigError("standard_rows must be at least n_train")
    lofi = WindLowFidelity()
    sensors = SensorGrid(lofi.pos)
    # Standard baseline: wind inputs to the branch, turbine location to the trunk.
    layout_std = TrunkLayout()
    layout_bifi = TrunkLayout((0, 1, 2))
    train = wind_hifi_samples(n_std, seeds["xi_train"]).hifi
    val = wind_hifi_samples(cfg.n_val, seeds["xi_val"]).hifi
    meta = {"example": "external", "generator": "wind-toy", "sensors": sensors.locations.tolist()}
    head = HifiSamples(train.xi[:cfg.n_train], train.coords, train.values[:cfg.n_train],
                       train.xi_names, train.coord_names)
    out = {}
    for split, bifi_s, std_s in (("train", head, train), ("val", val, val)):
        out[f"{split}_bifi"] = build_discrepancy_dataset(bifi_s, lofi, sensors, layout_bifi, meta)
        out[f"{split}_standard"] = standard_baseline_dataset(
            std_s, xi_source, None, layout_std,
            {"example": "external", "generator": "wind-toy", "hifi_budget": n_std},
            branch_names=std_s.xi_names)
    return out


# ---------------------------------------------------------------- pipeline


def build_bundles(cfg: ExperimentConfig) -> dict[str, DatasetBundle]:
    if cfg.example.startswith("duffing"):
        return _duffing_bundles(cfg)
    if cfg.example.startswith("heat"):
        return _heat_bundles(cfg)
    return _wind_bundles(cfg)


def bundle_dir(out: Path, split: str, kind: str) -> Path:
    return Path(out) / "data" / f"{split}_{kind}"


def run_generate(cfg: ExperimentConfig) -> dict[str, Path]:
    """Write train/val bundles for both the bi-fidelity and the standard formulation."""
    bundles = build_bundles(cfg)
    paths = {}
    for key, b in bundles.items():
        split, kind = key.split("_")
        b.meta.setdefault("seed", cfg.seed)
        paths[key] = save_bundle(b, bundle_dir(cfg.out_dir, split, kind))
    return paths


def train_bundle(cfg: ExperimentConfig, bundle: DatasetBundle, kind: str = "bifi"):
    """Fit a DeepONet with the configured architecture; returns (net, report)."""
    a = cfg.architecture
    sensors = None
    if kind == "bifi" and "sensors" in bundle.meta:
        sensors = SensorGrid(np.array(bundle.meta["sensors"], dtype=np.float64))
        if sensors.m != bundle.m:
            sensors = None
    net = build_deeponet(bundle.m, bundle.trunk_dim, (a.width,) * a.branch_depth, (a.width,) * a.trunk_depth,
                         a.p, seed=cfg.training.seed, sensors=sensors)
    fit_normalization(net, bundle)
    net.info = {"kind": kind, "example": cfg.example, "trunk_names": bundle.trunk_names}
    report = train(net, bundle, cfg.training.to_train_config())
    return net, report


def model_path(out: Path, kind: str) -> Path:
    return Path(out) / "models" / f"{kind}.json"


def run_train(cfg: ExperimentConfig, kinds=KINDS) -> dict[str, Path]:
    out = {}
    for kind in kinds:
        bundle = load_bundle(bundle_dir(cfg.out_dir, "train", kind))
        net, report = train_bundle(cfg, bundle, kind)
        path = model_path(cfg.out_dir, kind)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_model(net, path)
        with open(path.with_name(f"{kind}_loss.csv"), "w") as fh:
            fh.write("epoch,loss\n")
            fh.writelines(f"{e},{fmt(v)}\n" for e, v in zip(report.epochs, report.losses))
        out[kind] = path
    return out


def evaluate_model(net, bundle: DatasetBundle, n_bins: int = 30):
    """Validation report on full responses (the offset adds u_l back for bi-fidelity bundles)."""
    if net.m != bundle.m:
        raise DimensionError(f"model expects m={net.m} branch inputs but bundle has m={bundle.m}")
    if net.trunk_dim != bundle.trunk_dim:
        raise DimensionError(f"model expects trunk_dim={net.trunk_dim} but bundle has {bundle.trunk_dim}")
    pred = net.predict(bundle.branch, bundle.trunk, bundle.index) + bundle.offset
    return validation_report(pred, bundle.truth, bundle.index, n_bins)


def run_evaluate(model_file, bundle_path, out_dir, kind: str = "model", n_bins: int = 30):
    net = load_model(model_file)
    rep = evaluate_model(net, load_bundle(bundle_path), n_bins)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{kind}_summary.json").write_text(json.dumps({"epsilon_val": rep.epsilon_val}) + "\n")
    write_errors(out / f"{kind}_errors.csv", rep.errors)
    write_histogram(out / f"{kind}_histogram.csv", rep.histogram)
    return rep


def run_evaluate_all(cfg: ExperimentConfig, kinds=KINDS) -> dict:
    return {
        kind: run_evaluate(model_path(cfg.out_dir, kind), bundle_dir(cfg.out_dir, "val", kind),
                           cfg.out_dir / "eval", kind)
        for kind in kinds
    }


def run_report(cfg: ExperimentConfig) -> dict[str, float]:
    """Collect epsilon_val for both formulations into report.csv."""
    eps = {}
    for kind in KINDS:
        path = cfg.out_dir / "eval" / f"{kind}_summary.json"
        try:
            eps[kind] = float(json.loads(path.read_text())["epsilon_val"])
        except json.JSONDecodeError as exc:
            raise ParseError(str(exc), path, exc.lineno) from None
    ratio = eps["standard"] / eps["bifi"] if eps["bifi"] > 0 else float("inf")
    (cfg.out_dir / "report.csv").write_text(
        "example,eps_bifi,eps_standard,improvement\n"
        f"{cfg.example},{fmt(eps['bifi'])},{fmt(eps['standard'])},{fmt(ratio)}\n")
    return {**eps, "improvement": ratio}


def run_bound(cfg: ExperimentConfig, applications=("I", "II")) -> dict:
    out = {}
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    for app in applications:
        cmp = bound_comparison(app, cfg.bound_samples, seed=cfg.seed)
        write_bound_table(cfg.out_dir / f"bound_{app}.csv", cmp)
        out[app] = cmp
    return out


def ingest_external(branch_file, trunk_file, target_file, meta: dict | None = None) -> DatasetBundle:
    """Validate user-supplied tables into a bundle.

    ``target_file`` needs ``branch_index`` and ``target`` columns and may carry
    an ``offset`` column (the low-fidelity value at each row).
    """
    bnames, branch = read_table(branch_file)
    tnames, trunk = read_table(trunk_file)
    header, tgt = read_table(target_file, required=["branch_index", "target"])
    cols = {h: tgt[:, i] for i, h in enumerate(header)}
    index = cols["branch_index"]
    if trunk.shape[0] != tgt.shape[0]:
        raise ParseError(f"{trunk.shape[0]} trunk rows but {tgt.shape[0]} target rows", target_file)
    for lineno, i in enumerate(index, start=2):
        if i != int(i) or not 0 <= i < branch.shape[0]:
            raise ParseError(f"branch_index {i:g} out of range [0, {branch.shape[0]})", target_file, lineno)
    return DatasetBundle(branch, trunk, cols["target"], index.astype(np.int64), cols.get("offset"),
                         dict(meta or {}), bnames, tnames)


def run_ingest(cfg: ExperimentConfig) -> dict[str, Path]:
    """Ingest the file sets listed in [external] as ``<split>_<kind>_{branch,trunk,target}``."""
    ext = cfg.external
    paths = {}
    for split in ("train", "val"):
        for kind in KINDS:
            keys = [f"{split}_{kind}_{part}" for part in ("branch", "trunk", "target")]
            if not any(k in ext for k in keys):
                continue
            missing = [k for k in keys if k not in ext]
            if missing:
                raise ConfigError(f"[external] is missing {missing}")
            b = ingest_external(*(ext[k] for k in keys), meta={"example": "external", "kind": kind})
            paths[f"{split}_{kind}"] = save_bundle(b, bundle_dir(cfg.out_dir, split, kind))
    if not paths:
        raise ConfigError("[external] lists no dataset files")
    return paths
