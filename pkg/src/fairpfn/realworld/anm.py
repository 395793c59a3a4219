"""Ingestion, additive-noise model fitting, noise inference and
counterfactual twins for declared real-world graphs."""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import Dataset
from .graph import CausalGraphSpec, load_graph
from .trees import BaggedRegressor

log = logging.getLogger(__name__)

TWIN_METHOD = "anm-prob-residual"
MISSING = {"", "?", "na", "nan", "none", "null"}


class IngestError(ValueError):
    pass


def _norm(name):
    return re.sub(r"[^0-9a-z]+", "_", name.strip().lower()).strip("_")


def _read_rows(path, graph):
    with Path(path).open(newline="") as f:
        rows = [[c.strip() for c in r] for r in csv.reader(f, skipinitialspace=True)
                if r and not r[0].startswith("|")]
    if not rows:
        raise IngestError(f"{path}: empty file")
    expected = [_norm(c) for c in graph.columns]
    first = [_norm(c) for c in rows[0]]
    if first and first[0] in ("", "unnamed_0", "index") and first[1:] == expected:
        # leading pandas index column
        return [r[1:] for r in rows[1:]], expected
    if first == expected:
        return rows[1:], expected
    if not graph.header and len(rows[0]) == len(expected) and set(first).isdisjoint(expected):
        return rows, expected
    if set(first) & set(expected) or graph.header:
        missing = sorted(set(expected) - set(first))
        extra = sorted(set(first) - set(expected) - {"", "unnamed_0", "index"})
        raise IngestError(f"{path}: header mismatch; missing columns {missing}, extra columns {extra}")
    raise IngestError(f"{path}: expected {len(expected)} columns, found {len(rows[0])}")


def _encode(values, rule, name):
    kind = rule.get("type", "float")
    if kind == "binary":
        if "zero" in rule:
            return np.array([0 if v in rule["zero"] else 1 for v in values], dtype=np.float64), None
        return np.array([1 if v in rule["one"] else 0 for v in values], dtype=np.float64), None
    if kind == "ordinal":
        cats = sorted(set(values))
        index = {c: i for i, c in enumerate(cats)}
        return np.array([index[v] for v in values], dtype=np.float64), cats
    try:
        return np.array([float(v) for v in values]), None
    except ValueError as exc:
        raise IngestError(f"column {name}: non-numeric value ({exc})") from None


def ingest(name, csv_path, graph=None):
    """Read a standard release of ``law`` or ``adult`` into a Dataset.

    Rows with a missing value in any graph column are dropped; the count
    is logged and kept in ``meta['dropped_rows']``.
    """
    graph = graph or load_graph(name)
    if not Path(csv_path).exists():
        raise FileNotFoundError(csv_path)
    rows, header = _read_rows(csv_path, graph)
    pos = {c: i for i, c in enumerate(header)}
    used = [_norm(n) for n in graph.nodes]
    for n in used:
        if n not in pos:
            raise IngestError(f"graph node {n} not among columns {header}")
    kept = [r for r in rows if len(r) == len(header) and all(r[pos[n]].lower() not in MISSING for n in used)]
    dropped = len(rows) - len(kept)
    log.info("%s: %d rows kept, %d dropped for missing values", name, len(kept), dropped)
    if not kept:
        raise IngestError(f"{csv_path}: no complete rows")
    cols, categories = {}, {}
    for node in graph.nodes:
        rule = graph.encode.get(node, {})
        cols[node], cats = _encode([r[pos[_norm(node)]] for r in kept], rule, node)
        if cats is not None:
            categories[node] = cats
    feats = graph.features
    ds = Dataset(A=cols[graph.protected].astype(np.int64), X=np.column_stack([cols[f] for f in feats]),
                 y=cols[graph.target].astype(np.int64), feature_names=feats,
                 meta={"source": str(csv_path), "dataset": name, "dropped_rows": dropped,
                       "graph": f"{graph.name}.v{graph.version}", "categories": categories})
    return ds, graph


def node_values(graph, dataset):
    vals = {graph.protected: dataset.A.astype(np.float64), graph.target: dataset.y.astype(np.float64)}
    for j, f in enumerate(dataset.feature_names):
        vals[f] = dataset.X[:, j]
    missing = [n for n in graph.nodes if n not in vals]
    if missing:
        raise ValueError(f"dataset lacks graph nodes {missing}")
    return vals


@dataclass
class FittedAnm:
    graph: CausalGraphSpec
    regressors: dict              # non-root node -> BaggedRegressor
    residuals: dict               # non-root node -> per-row residual
    observed: dict                # node -> observed values
    flags: dict = field(default_factory=dict)
    seed: int = 0

    @property
    def n(self):
        return len(self.observed[self.graph.protected])

    def predict_node(self, node, values):
        parents = self.graph.parents[node]
        return self.regressors[node].predict(np.column_stack([values[p] for p in parents]))


def fit_anm(graph, dataset, n_trees=50, max_depth=4, seed=0):
    """Regress each non-root node on its parents and keep the residuals."""
    vals = node_values(graph, dataset)
    regs, resid, flags = {}, {}, {}
    for i, node in enumerate(graph.topological_order()):
        parents = graph.parents[node]
        if not parents:
            continue
        P = np.column_stack([vals[p] for p in parents])
        reg = BaggedRegressor(n_trees=n_trees, max_depth=max_depth, seed=seed * 1000 + i).fit(P, vals[node])
        if reg.constant:
            flags[node] = "constant-parents"
            log.warning("node %s: parents have zero variance, using the mean", node)
        regs[node] = reg
        resid[node] = vals[node] - reg.predict(P)
    return FittedAnm(graph, regs, resid, vals, flags, seed)


def compute_noise(fitted):
    """Residual columns ``eps_<node>`` for every non-root node except the target."""
    g = fitted.graph
    return {f"eps_{n}": fitted.residuals[n] for n in g.topological_order()
            if n in fitted.residuals and n != g.target}


def propagate(fitted, protected_values):
    """Node values after setting the protected node, replaying stored residuals.

    Returns ``(values, probabilities)``; the second maps binary non-root
    nodes to their clamped probability-space value.
    """
    g = fitted.graph
    vals = {g.protected: np.asarray(protected_values, dtype=np.float64)}
    probs = {}
    affected = g.descendants(g.protected)
    for node in g.topological_order():
        if node == g.protected:
            continue
        if node not in affected:
            vals[node] = fitted.observed[node]
            continue
        v = fitted.predict_node(node, vals) + fitted.residuals[node]
        if g.kinds[node] == "binary":
            probs[node] = np.clip(v, 0.0, 1.0)
            v = (probs[node] >= 0.5).astype(np.float64)
        vals[node] = v
    return vals, probs


def counterfactual_twin(fitted, dataset):
    """``dataset`` with the protected value flipped on every row and its descendants replayed."""
    g = fitted.graph
    if len(dataset.A) != fitted.n:
        raise ValueError(f"dataset has {len(dataset.A)} rows, fit has {fitted.n}")
    vals, probs = propagate(fitted, 1 - dataset.A)
    feats = dataset.feature_names
    meta = dict(dataset.meta, mode="counterfactual", twin_method=TWIN_METHOD)
    return Dataset(A=1 - dataset.A, X=np.column_stack([vals[f] for f in feats]),
                   y=vals[g.target].astype(np.int64), y_cont=probs.get(g.target),
                   feature_names=list(feats), meta=meta)
