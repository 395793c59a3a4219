"""Per-instance evaluation: split, fit every method, score the twins."""
from __future__ import annotations

import logging

import numpy as np

from .. import baselines as bl
from ..metrics import PredictionSet, effect_report, na_rows
from ..model import predict
from ..rng import stream

log = logging.getLogger(__name__)

METHODS = ("fairpfn", "unfair", "unaware", "constant", "random", "level1", "level2", "level3", "egr")
TRAIN_FRACTION = 0.7
MAX_CONTEXT = 2000
TWIN_ROLES = ("counterfactual", "direct_twin", "indirect_twin")


def split_rows(dataset_id, n, seed, train_fraction=TRAIN_FRACTION):
    """Deterministic (train, test) row indices for one instance."""
    order = stream(seed, "eval-split", dataset_id).permutation(n)
    k = int(np.clip(round(train_fraction * n), 2, n - 2))
    return np.sort(order[:k]), np.sort(order[k:])


def build_task(instance, seed):
    """EvalTask over the factual train split and every test-split view."""
    iid = instance.entry["id"]
    tr, te = split_rows(iid, instance.factual.n, seed)
    views = {"factual": instance.factual, "counterfactual": instance.counterfactual,
             "direct_twin": instance.direct_twin, "indirect_twin": instance.indirect_twin}
    test = {role: ds.subset(te) for role, ds in views.items() if ds is not None}
    cols = instance.fair_info.columns
    return bl.EvalTask(
        dataset_id=iid, case=instance.case, train=instance.factual.subset(tr), test=test,
        oracle_train={k: v[tr] for k, v in cols.items()},
        oracle_test={k: v[te] for k, v in cols.items()}, seed=seed,
    ), te


def fairpfn_scores(checkpoint, task, max_context=MAX_CONTEXT):
    """One forward pass: all test views are query rows against the train context."""
    tr = task.train
    roles = list(task.test)
    A_q = np.concatenate([task.test[r].A for r in roles])
    X_q = np.concatenate([task.test[r].X for r in roles])
    p = predict(checkpoint, (tr.A, tr.X, tr.y), (A_q, X_q), max_context=max_context, seed=task.seed)
    out, start = {}, 0
    for r in roles:
        k = task.test[r].n
        out[r] = p[start:start + k]
        start += k
    return out


def scores_for(method, task, checkpoints, base_learner="logistic"):
    if method == "fairpfn":
        if checkpoints.get("fairpfn") is None:
            raise ValueError("method fairpfn needs a checkpoint")
        return fairpfn_scores(checkpoints["fairpfn"], task)
    spec = bl.BaselineSpec(kind=method, base_learner=base_learner, checkpoint=checkpoints.get("pfn-unfair"))
    return bl.fit_predict(spec, task)


def method_id(method, base_learner):
    if method == "fairpfn":
        return method
    return bl.BaselineSpec(kind=method, base_learner=base_learner).method_id


def evaluate_instance(instance, methods, checkpoints, seed=0, run_id="run", base_learner="logistic"):
    """Result rows for every method on one loaded instance."""
    task, te = build_task(instance, seed)
    iid, case = task.dataset_id, task.case
    y_fair = instance.fair_info.y_fair
    rows = []
    for method in methods:
        mid = method_id(method, base_learner)
        try:
            s = scores_for(method, task, checkpoints, base_learner)
        except bl.NotApplicable:
            rows.extend(na_rows(run_id, iid, case, mid, seed))
            continue
        except ValueError as exc:
            log.warning("%s on %s: %s; recorded as n/a", mid, iid, exc)
            rows.extend(na_rows(run_id, iid, case, mid, seed))
            continue
        preds = PredictionSet(
            factual=s["factual"], twin=s["counterfactual"], labels=task.test["factual"].y,
            groups=task.test["factual"].A, direct_twin=s.get("direct_twin"),
            indirect_twin=s.get("indirect_twin"),
            fair_labels=None if y_fair is None else y_fair[te],
        )
        rows.extend(effect_report(preds, iid, mid, seed).rows(run_id, case))
    return rows
