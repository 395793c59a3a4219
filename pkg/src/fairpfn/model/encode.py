"""Turn a table into context and query token inputs.

Slot 0 always carries the protected attribute, slots 1..m the features,
the remaining slots are zero with a pad indicator set. Each column is
z-normalized using context rows only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLIP = 10.0


@dataclass
class EncodedBatch:
    context: np.ndarray        # (n_ctx, 2 * slots): normalized values then pad indicator
    query: np.ndarray          # (n_query, 2 * slots)
    context_labels: np.ndarray  # (n_ctx,) in {0, 1}
    mean: np.ndarray           # (1 + m,) context statistics per real column
    scale: np.ndarray

    @property
    def n_context(self):
        return len(self.context)

    def attention_mask(self):
        """Boolean (n_ctx + n_query, n_ctx + n_query): True where row attends to column.

        Every token attends to every context token and nothing else, so
        queries never see each other.
        """
        n_c, n_q = len(self.context), len(self.query)
        mask = np.zeros((n_c + n_q, n_c + n_q), dtype=bool)
        mask[:, :n_c] = True
        return mask


def columns(A, X):
    return np.column_stack([np.asarray(A, dtype=np.float64), np.asarray(X, dtype=np.float64).reshape(len(A), -1)])


def encode(context, query, context_labels, max_slots):
    """``context``/``query`` are (rows, 1 + m) arrays with the protected column first."""
    context = np.asarray(context, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    width = context.shape[1]
    if query.shape[1] != width:
        raise ValueError(f"context has {width - 1} features but query has {query.shape[1] - 1}")
    if width > max_slots:
        raise ValueError(f"{width - 1} features exceed the model's {max_slots - 1} feature slots")
    if len(context) == 0:
        raise ValueError("empty context")
    mean = context.mean(axis=0)
    scale = context.std(axis=0)
    scale[scale <= 1e-12] = 1.0

    def tokens(rows):
        z = np.clip((rows - mean) / scale, -CLIP, CLIP)
        out = np.zeros((len(rows), 2 * max_slots))
        out[:, :width] = z
        out[:, max_slots + width:] = 1.0
        return out

    labels = np.asarray(context_labels, dtype=np.int64)
    if labels.shape != (len(context),):
        raise ValueError(f"{len(labels)} context labels for {len(context)} context rows")
    return EncodedBatch(tokens(context), tokens(query), labels, mean, scale)
