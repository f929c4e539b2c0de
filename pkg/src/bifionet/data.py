"""Aligned branch/trunk/target tables and their on-disk form.

A bundle directory holds four files::

    meta.json     counts, dimensions, format tag, provenance
    branch.csv    N_f rows x m sensor values
    trunk.csv     N_d rows x trunk_dim coordinates
    target.csv    N_d rows: branch_index, target, offset

``offset`` is the low-fidelity response added back to a prediction to recover
the full response (zero for standard bundles), so ``target + offset`` is the
true response at each row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, DimensionError, ParseError

BUNDLE_FORMAT = "bifionet-bundle/1"


def fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class DatasetBundle:
    branch: np.ndarray
    trunk: np.ndarray
    target: np.ndarray
    index: np.ndarray
    offset: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    branch_names: list[str] | None = None
    trunk_names: list[str] | None = None

    def __post_init__(self):
        self.branch = np.atleast_2d(np.asarray(self.branch, dtype=np.float64))
        self.trunk = np.asarray(self.trunk, dtype=np.float64)
        if self.trunk.ndim == 1:
            self.trunk = self.trunk[:, None]
        self.target = np.asarray(self.target, dtype=np.float64).reshape(-1)
        self.index = np.asarray(self.index, dtype=np.int64).reshape(-1)
        if self.offset is None:
            self.offset = np.zeros_like(self.target)
        else:
            self.offset = np.asarray(self.offset, dtype=np.float64).reshape(-1)
        self.validate()

    @property
    def n_functions(self) -> int:
        return self.branch.shape[0]

    @property
    def n_rows(self) -> int:
        return self.target.shape[0]

    @property
    def m(self) -> int:
        return self.branch.shape[1]

    @property
    def trunk_dim(self) -> int:
        return self.trunk.shape[1]

    @property
    def truth(self) -> np.ndarray:
        """Full response ``target + offset`` at every row."""
        return self.target + self.offset

    def validate(self) -> None:
        n = self.target.shape[0]
        if self.trunk.shape[0] != n or self.index.shape[0] != n or self.offset.shape[0] != n:
            raise DimensionError(
                f"row counts disagree: trunk {self.trunk.shape[0]}, target {n}, "
                f"index {self.index.shape[0]}, offset {self.offset.shape[0]}"
            )
        if n and (self.index.min() < 0 or self.index.max() >= self.branch.shape[0]):
            raise ContractError(f"branch index out of range [0, {self.branch.shape[0]})")

    def subset_functions(self, keep) -> "DatasetBundle":
        """Bundle restricted to the given branch rows (realizations), re-indexed."""
        keep = np.asarray(keep, dtype=np.int64)
        remap = -np.ones(self.n_functions, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        rows = np.flatnonzero(remap[self.index] >= 0)
        return DatasetBundle(
            self.branch[keep], self.trunk[rows], self.target[rows], remap[self.index[rows]],
            self.offset[rows], dict(self.meta), self.branch_names, self.trunk_names,
        )

    def permuted(self, perm) -> "DatasetBundle":
        perm = np.asarray(perm)
        return DatasetBundle(
            self.branch, self.trunk[perm], self.target[perm], self.index[perm],
            self.offset[perm], dict(self.meta), self.branch_names, self.trunk_names,
        )


def _meta_record(b: DatasetBundle) -> dict:
    meta = dict(b.meta)
    meta.update(
        format=BUNDLE_FORMAT,
        n_functions=b.n_functions,
        n_rows=b.n_rows,
        m=b.m,
        trunk_dim=b.trunk_dim,
    )
    return meta


def _write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def save_bundle(bundle: DatasetBundle, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    bnames = bundle.branch_names or [f"s{j}" for j in range(bundle.m)]
    tnames = bundle.trunk_names or [f"y{j}" for j in range(bundle.trunk_dim)]
    _write_table(d / "branch.csv", bnames, ([fmt(v) for v in r] for r in bundle.branch))
    _write_table(d / "trunk.csv", tnames, ([fmt(v) for v in r] for r in bundle.trunk))
    _write_table(
        d / "target.csv",
        ["branch_index", "target", "offset"],
        ([str(int(i)), fmt(t), fmt(o)] for i, t, o in zip(bundle.index, bundle.target, bundle.offset)),
    )
    (d / "meta.json").write_text(json.dumps(_meta_record(bundle), indent=2, sort_keys=True) + "\n")
    return d


def read_table(path, required: list[str] | None = None) -> tuple[list[str], np.ndarray]:
    """Parse a header + numeric rows CSV, reporting the offending line on failure."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file (missing header line)", path, 1) from None
        if required:
            missing = [c for c in required if c not in header]
            if missing:
                raise ParseError(f"missing column(s) {missing}", path, 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"non-numeric cell in row {row!r}", path, lineno) from None
    arr = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return header, arr


def load_bundle(directory) -> DatasetBundle:
    d = Path(directory)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), d / "meta.json", exc.lineno) from None
    if meta.get("format") != BUNDLE_FORMAT:
        raise ParseError(f"unsupported bundle format {meta.get('format')!r}", d / "meta.json")
    bnames, branch = read_table(d / "branch.csv")
    tnames, trunk = read_table(d / "trunk.csv")
    theader, tgt = read_table(d / "target.csv", required=["branch_index", "target"])
    cols = {h: tgt[:, i] for i, h in enumerate(theader)}
    index = cols["branch_index"]
    if np.any(index != np.round(index)):
        raise ParseError("branch_index must hold integers", d / "target.csv")
    for key, actual in (("n_functions", branch.shape[0]), ("n_rows", tgt.shape[0]),
                        ("m", branch.shape[1]), ("trunk_dim", trunk.shape[1])):
        if key in meta and int(meta[key]) != actual:
            raise ParseError(f"meta {key}={meta[key]} but tables give {actual}", d / "meta.json")
    meta = {k: v for k, v in meta.items() if k not in ("format", "n_functions", "n_rows", "m", "trunk_dim")}
    try:
        return DatasetBundle(branch, trunk, cols["target"], index.astype(np.int64),
                             cols.get("offset"), meta, bnames, tnames)
    except (DimensionError, ContractError) as exc:
        raise ParseError(str(exc), d) from None
