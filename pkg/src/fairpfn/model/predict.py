from __future__ import annotations

import numpy as np

from ..rng import stream
from .encode import columns, encode
from .transformer import as_tensors, forward

QUERY_CHUNK = 2048


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict(checkpoint, context, query, max_context=None, seed=0):
    """P(y = 1) for each query row.

    ``context`` is ``(A, X, y_observed)``, ``query`` is ``(A, X)``. With a
    single-class context the model has nothing to condition on and the
    smoothed label rate is returned instead. ``max_context`` subsamples
    very large contexts (deterministically from ``seed``).
    """
    A_c, X_c, y_c = context
    A_q, X_q = query
    ctx = columns(A_c, X_c)
    qry = columns(A_q, X_q)
    y_c = np.asarray(y_c, dtype=np.int64)
    if ctx.shape[1] != qry.shape[1]:
        raise ValueError(f"context has {ctx.shape[1] - 1} features but query has {qry.shape[1] - 1}")
    if y_c.min() == y_c.max():
        return np.full(len(qry), (y_c.sum() + 1.0) / (len(y_c) + 2.0))
    if max_context is not None and len(ctx) > max_context:
        keep = np.sort(stream(seed, "ctx").choice(len(ctx), max_context, replace=False))
        ctx, y_c = ctx[keep], y_c[keep]

    params = as_tensors(checkpoint.params)
    cfg = checkpoint.config
    out = []
    for start in range(0, len(qry), QUERY_CHUNK):
        batch = encode(ctx, qry[start:start + QUERY_CHUNK], y_c, cfg.max_slots)
        out.append(np.clip(_sigmoid(forward(params, cfg, batch).data), 1e-12, 1 - 1e-12))
    return np.concatenate(out) if out else np.empty(0)


def bce(probabilities, labels):
    """Mean binary cross-entropy of probabilities clamped to [1e-12, 1 - 1e-12]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"{p.shape} probabilities vs {y.shape} labels")
    p = np.clip(p, 1e-12, 1 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))
