"""Tabular dataset container and the CSV + JSON-sidecar file format."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


@dataclass
class Dataset:
    A: np.ndarray                 # group ids in {0, 1}
    X: np.ndarray                 # (n, m) features
    y: np.ndarray                 # binary labels
    y_cont: np.ndarray | None = None
    feature_names: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.int64)
        self.X = np.asarray(self.X, dtype=np.float64).reshape(len(self.A), -1)
        self.y = np.asarray(self.y, dtype=np.int64)
        if not self.feature_names:
            self.feature_names = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if len(self.y) != len(self.A):
            raise ValueError(f"{len(self.A)} protected values but {len(self.y)} labels")
        if len(self.feature_names) != self.X.shape[1]:
            raise ValueError("feature_names length does not match X")

    @property
    def n(self):
        return len(self.A)

    @property
    def m(self):
        return self.X.shape[1]

    def subset(self, rows):
        return replace(
            self,
            A=self.A[rows], X=self.X[rows], y=self.y[rows],
            y_cont=None if self.y_cont is None else self.y_cont[rows],
            meta=dict(self.meta),
        )

    def same_values(self, other):
        return (np.array_equal(self.A, other.A) and np.array_equal(self.X, other.X)
                and np.array_equal(self.y, other.y))

    def digest(self):
        h = hashlib.sha256()
        for arr in (self.A, self.X, self.y):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _fmt(v):
    return repr(float(v))


def write_dataset(ds, path, extra_meta=None):
    """Write ``path`` (CSV) and ``path`` with ``.json`` suffix (sidecar)."""
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["A", *ds.feature_names, "y"])
        for a, row, y in zip(ds.A, ds.X, ds.y):
            w.writerow([int(a), *map(_fmt, row), int(y)])
    meta = {k: v for k, v in ds.meta.items() if isinstance(v, (str, int, float, bool, type(None)))}
    meta.update({
        "schema_version": SCHEMA_VERSION,
        "protected": "A",
        "target": "y",
        "seed": ds.meta.get("seed"),
        "scm_hash": ds.meta.get("scm_hash"),
        "a0": ds.meta.get("a0", 0.0),
        "a1": ds.meta.get("a1", 1.0),
        "twin_of": ds.meta.get("twin_of"),
        "noise_file": ds.meta.get("noise_file"),
    })
    meta.update(extra_meta or {})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_dataset(path):
    path = Path(path)
    with path.open(newline="") as f:
        rows = list(csv.reader(f))
    header, body = rows[0], rows[1:]
    if header[0] != "A" or header[-1] != "y":
        raise ValueError(f"{path}: expected header A,<features>,y; got {header}")
    arr = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    side = path.with_suffix(".json")
    meta = json.loads(side.read_text()) if side.exists() else {}
    if meta.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ValueError(f"{side}: unsupported schema_version {meta['schema_version']}")
    return Dataset(A=arr[:, 0], X=arr[:, 1:-1], y=arr[:, -1],
                   feature_names=header[1:-1], meta=meta)


def write_matrix(path, columns, names):
    """Plain numeric CSV, used for noise draws and oracle columns."""
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])
    return path


def read_matrix(path):
    with Path(path).open(newline="") as f:
        rows = list(csv.reader(f))
    names = rows[0]
    arr = np.array(rows[1:], dtype=np.float64).reshape(len(rows) - 1, len(names))
    return {name: arr[:, j] for j, name in enumerate(names)}
