"""Causal-effect, error and counterfactual-consistency metrics for predictors.

Effects are computed on probability outputs. When group ids are supplied
the per-row differences are oriented from group 0 to group 1, so the
total effect is ``|E[pred(A=1 world) - pred(A=0 world)]|`` instead of a
mean that cancels across groups.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

RESULT_COLUMNS = ("run_id", "dataset_id", "case", "method", "metric", "value", "seed")


@dataclass
class AucResult:
    value: float
    degenerate: bool

    def __float__(self):
        return self.value


def auc(scores, labels):
    """Mann-Whitney AUC with midranks for ties; 0.5 flagged degenerate if one class."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError(f"{s.shape} scores vs {y.shape} labels")
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return AucResult(0.5, True)
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return AucResult(float(u / (n_pos * n_neg)), False)


def _diffs(pred_factual, pred_twin, groups):
    f = np.asarray(pred_factual, dtype=np.float64)
    t = np.asarray(pred_twin, dtype=np.float64)
    if f.shape != t.shape:
        raise ValueError(f"factual {f.shape} vs twin {t.shape}")
    if f.size == 0:
        raise ValueError("empty prediction arrays")
    d = t - f
    if groups is not None:
        g = np.asarray(groups)
        if g.shape != f.shape:
            raise ValueError(f"groups {g.shape} vs predictions {f.shape}")
        d = np.where(g == 0, d, -d)
    return d


def tce(pred_factual, pred_twin, groups=None):
    """Total causal effect on predictions, ``|mean(twin - factual)|`` (oriented if groups given)."""
    return float(abs(_diffs(pred_factual, pred_twin, groups).mean()))


def de_ie(pred_factual, pred_direct_twin=None, pred_indirect_twin=None, groups=None):
    """(DE, IE); an effect whose twin is ``None`` comes back as ``None``."""
    de = None if pred_direct_twin is None else tce(pred_factual, pred_direct_twin, groups)
    ie = None if pred_indirect_twin is None else tce(pred_factual, pred_indirect_twin, groups)
    return de, ie


def cf_mae(pred_factual, pred_twin):
    """Mean per-row absolute change between factual and counterfactual predictions."""
    return float(np.abs(_diffs(pred_factual, pred_twin, None)).mean())


def dp_gap(scores, groups):
    s = np.asarray(scores, dtype=np.float64)
    g = np.asarray(groups)
    if s.shape != g.shape:
        raise ValueError(f"{s.shape} scores vs {g.shape} groups")
    if not ((g == 0).any() and (g == 1).any()):
        raise ValueError("demographic parity needs both groups present")
    return float(abs(s[g == 1].mean() - s[g == 0].mean()))


@dataclass
class PredictionSet:
    factual: np.ndarray
    twin: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    direct_twin: np.ndarray | None = None
    indirect_twin: np.ndarray | None = None
    fair_labels: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.factual)
        for name in ("twin", "labels", "groups", "direct_twin", "indirect_twin", "fair_labels"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != n:
                raise ValueError(f"{name} has {len(arr)} rows, factual has {n}")


@dataclass
class EffectReport:
    dataset_id: str
    method: str
    seed: int
    tce: float
    error: float
    cf_mae: float
    dp_gap: float
    de: float | None = None
    ie: float | None = None
    auc_fair: float | None = None
    flags: dict = field(default_factory=dict)

    def rows(self, run_id, case):
        out = []
        for metric in ("tce", "de", "ie", "error", "auc_fair", "cf_mae", "dp_gap"):
            v = getattr(self, metric)
            out.append((run_id, self.dataset_id, case, self.method, metric,
                        "n/a" if v is None else repr(float(v)), self.seed))
        return out


def effect_report(preds, dataset_id, method, seed=0):
    de, ie = de_ie(preds.factual, preds.direct_twin, preds.indirect_twin, preds.groups)
    a = auc(preds.factual, preds.labels)
    fair = None
    if preds.fair_labels is not None:
        fa = auc(preds.factual, preds.fair_labels)
        fair = None if fa.degenerate else fa.value
    return EffectReport(
        dataset_id=dataset_id, method=method, seed=seed,
        tce=tce(preds.factual, preds.twin, preds.groups),
        error=1.0 - a.value, cf_mae=cf_mae(preds.factual, preds.twin),
        dp_gap=dp_gap(preds.factual, preds.groups), de=de, ie=ie, auc_fair=fair,
        flags={"auc_degenerate": a.degenerate},
    )


def na_rows(run_id, dataset_id, case, method, seed):
    """Rows recording that a method does not apply to a dataset."""
    return [(run_id, dataset_id, case, method, m, "n/a", seed)
            for m in ("tce", "de", "ie", "error", "auc_fair", "cf_mae", "dp_gap")]


def append_rows(path, rows):
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(RESULT_COLUMNS)
        w.writerows(rows)
