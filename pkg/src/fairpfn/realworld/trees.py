"""Bagged depth-limited regression trees on top of a least-squares line.

The linear part captures the bulk of smooth relations (and makes exact
linear structure reproducible to machine precision); the tree ensemble
models what is left.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Tree:
    # Flat arrays indexed by node id; leaves have feature == -1.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(64):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            idx = np.nonzero(inner)[0]
            go_left = X[idx, f[idx]] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
        return self.value[node]


def _best_split(X, r, min_leaf):
    """(gain, feature, threshold) of the best SSE-reducing split, or None."""
    n = len(r)
    total = r.sum()
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        csum = np.cumsum(rs)[:-1]
        k = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        # SSE reduction up to a constant: sum_L^2/n_L + sum_R^2/n_R
        gain = csum ** 2 / k + (total - csum) ** 2 / (n - k)
        gain = np.where(valid, gain, -np.inf)
        i = int(np.argmax(gain))
        if best is None or gain[i] > best[0]:
            best = (float(gain[i]), j, 0.5 * (xs[i] + xs[i + 1]))
    if best is None or best[0] <= total ** 2 / n + 1e-12:
        return None
    return best


def fit_tree(X, r, max_depth=4, min_leaf=5):
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(rows, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(r[rows].mean()))
        if depth >= max_depth or len(rows) < 2 * min_leaf:
            return node
        split = _best_split(X[rows], r[rows], min_leaf)
        if split is None:
            return node
        _, j, thr = split
        mask = X[rows, j] <= thr
        feature[node], threshold[node] = j, thr
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(len(r)), 0)
    return Tree(np.array(feature), np.array(threshold), np.array(left),
                np.array(right), np.array(value))


@dataclass
class BaggedRegressor:
    n_trees: int = 50
    max_depth: int = 4
    min_leaf: int = 5
    seed: int = 0
    coef: np.ndarray | None = None
    intercept: float = 0.0
    trees: list = field(default_factory=list)
    constant: bool = False

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64).reshape(len(y), -1)
        y = np.asarray(y, dtype=np.float64)
        if X.shape[1] == 0 or np.all(X.std(axis=0) == 0):
            self.coef, self.intercept, self.trees, self.constant = np.zeros(X.shape[1]), float(y.mean()), [], True
            return self
        design = np.column_stack([X, np.ones(len(y))])
        sol, *_ = np.linalg.lstsq(design, y, rcond=None)
        self.coef, self.intercept = sol[:-1], float(sol[-1])
        resid = y - design @ sol
        self.trees = []
        if np.max(np.abs(resid)) <= 1e-10 * max(1.0, np.max(np.abs(y))):
            return self
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_trees):
            rows = rng.integers(0, len(y), len(y))
            self.trees.append(fit_tree(X[rows], resid[rows], self.max_depth, self.min_leaf))
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(len(X), -1)
        out = X @ self.coef + self.intercept
        if self.trees:
            out = out + np.mean([t.predict(X) for t in self.trees], axis=0)
        return out
