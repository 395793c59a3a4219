import numpy as np
import pytest

from fairpfn import baselines as bl
from fairpfn import casebench as cb
from fairpfn.data import Dataset
from fairpfn.harness.evaluate import build_task
from fairpfn.metrics import auc, cf_mae, dp_gap, tce


def _task(case, w=3.0, sigma=0.2, n=600, seed=2):
    inst = cb.generate_case(cb.CaseStudyConfig(case=case, w_A=w, n=n, sigma=sigma, seed=seed))
    loaded = cb.LoadedInstance(
        entry={"id": f"{case}_x", "case": case}, factual=inst.factual, counterfactual=inst.counterfactual,
        direct_twin=inst.direct_twin.dataset if inst.direct_twin.present else None,
        indirect_twin=inst.indirect_twin.dataset if inst.indirect_twin.present else None,
        fair_info=inst.fair_info,
    )
    return build_task(loaded, seed=0)[0]


# -- logistic -------------------------------------------------------------

def test_logistic_without_signal_is_base_rate(rng):
    X = rng.normal(size=(20_000, 2))
    y = (rng.uniform(size=20_000) < 0.3).astype(int)
    p = bl.logistic_fit(X, y).predict_proba(X)
    assert np.all(np.abs(p - y.mean()) < 0.02)


def test_logistic_separable_data_ranks_perfectly():
    x = np.linspace(-1, 1, 40)
    y = (x > 0).astype(int)
    model = bl.logistic_fit(x[:, None], y)
    assert auc(model.predict_proba(x[:, None]), y).value == 1.0
    assert model.separated and np.linalg.norm(model.coef) <= bl.MAX_COEF_NORM + 1e-9


def test_weighted_fit_equals_duplicated_rows(rng):
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] + rng.normal(size=60) > 0).astype(int)
    w = rng.integers(1, 4, 60)
    weighted = bl.logistic_fit(X, y, sample_weights=w)
    dup = bl.logistic_fit(np.repeat(X, w, axis=0), np.repeat(y, w))
    assert np.linalg.norm(weighted.coef - dup.coef) < 1e-6
    assert abs(weighted.intercept - dup.intercept) < 1e-6


def test_logistic_input_errors():
    with pytest.raises(ValueError):
        bl.logistic_fit(np.zeros((1, 1)), [1])
    with pytest.raises(ValueError):
        bl.logistic_fit(np.zeros((3, 1)), [1, 1, 1])


# -- EGR ------------------------------------------------------------------

def test_multiplier_update_with_zero_violation_is_identity():
    theta = np.array([0.3, -1.2])
    assert np.array_equal(bl.multiplier_update(theta, [0.0, 0.0], 0.5), theta)
    lam = bl.multipliers(theta, 100.0)
    assert np.all(lam >= 0) and lam.sum() <= 100.0


def test_egr_on_protected_equals_label(rng):
    n = 1000
    A = rng.integers(0, 2, n)
    y = A.copy()
    X = np.column_stack([A, rng.normal(size=n)])
    unconstrained = bl.logistic_fit(X, y).predict_proba(X)
    assert dp_gap(unconstrained, A) > 0.95
    clf = bl.egr_fit(X, y, A, eps=0.05)
    p = clf.predict_proba(X)
    assert dp_gap(p, A) <= 0.05 + 0.02
    expected_accuracy = np.mean(p * y + (1 - p) * (1 - y))
    assert abs(expected_accuracy - 0.5) < 0.1
    assert abs(clf.weights.sum() - 1.0) < 1e-12 and np.all(clf.weights >= 0)


def test_egr_leaves_fair_data_alone(rng):
    n = 1000
    A = rng.integers(0, 2, n)
    Xf = rng.normal(size=n)
    y = (Xf + 0.5 * rng.normal(size=n) > 0).astype(int)
    X = np.column_stack([A, Xf])
    base = (bl.logistic_fit(X, y).decision(X) > 0).astype(float)
    clf = bl.egr_fit(X, y, A, eps=0.05)
    assert abs(dp_gap(clf.predict_proba(X), A) - dp_gap(base, A)) < 0.02
    assert clf.converged


def test_egr_members_are_reproducible(rng):
    n = 400
    A = rng.integers(0, 2, n)
    X = np.column_stack([A, rng.normal(size=n) + A])
    y = (X[:, 1] > 0.5).astype(int)
    a = bl.egr_fit(X, y, A, seed=3)
    b = bl.egr_fit(X, y, A, seed=3)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))
    assert a.seeds == b.seeds


# -- baseline ladder ------------------------------------------------------

def test_constant_baseline_scores_and_metrics():
    train = Dataset(A=np.array([0, 1, 0, 1]), X=np.zeros((4, 1)), y=np.array([1, 1, 1, 0]))
    task = bl.EvalTask("d", "direct", train, {"factual": train, "counterfactual": train})
    s = bl.fit_predict(bl.BaselineSpec("constant"), task)
    assert np.all(s["factual"] == 0.75)
    assert tce(s["factual"], s["counterfactual"]) == 0 and cf_mae(s["factual"], s["counterfactual"]) == 0
    assert auc(s["factual"], train.y).value == 0.5


def test_level_three_on_level_three_case_has_zero_effect():
    task = _task("level3")
    s = bl.fit_predict(bl.BaselineSpec("level3"), task)
    assert tce(s["factual"], s["counterfactual"], task.test["factual"].A) == 0.0


@pytest.mark.parametrize("level,case", [("level1", "biased"), ("level1", "level2"), ("level2", "level3"),
                                        ("level3", "biased"), ("level3", "level1")])
def test_inapplicable_level_raises_not_applicable(level, case):
    with pytest.raises(bl.NotApplicable):
        bl.fit_predict(bl.BaselineSpec(level), _task(case))


def test_applicability_matrix():
    ok = {k: {c for c in cb.CASES if cb.applicable(k, c)} for k in ("level1", "level2", "level3")}
    assert ok == {"level1": {"direct", "indirect"}, "level2": {"direct", "indirect", "level2"},
                  "level3": {"direct", "indirect", "level2", "level3"}}
    assert cb.applicable("level3", "law") and cb.applicable("level3", "adult")


def test_unfair_has_largest_effect_on_strong_biased_case():
    task = _task("biased", w=8.0, sigma=0.01)
    g = task.test["factual"].A
    effects = {}
    for kind in ("unfair", "unaware", "constant", "random"):
        s = bl.fit_predict(bl.BaselineSpec(kind), task)
        effects[kind] = tce(s["factual"], s["counterfactual"], g)
    assert max(effects, key=effects.get) == "unfair"


def test_random_baseline_mae_tends_to_one_third():
    task = _task("direct", n=1000)
    s = bl.fit_predict(bl.BaselineSpec("random"), task)
    assert abs(cf_mae(s["factual"], s["counterfactual"]) - 1 / 3) < 0.05


def test_method_ids():
    assert bl.BaselineSpec("unfair").method_id == "unfair"
    assert bl.BaselineSpec("unfair", base_learner="pfn").method_id == "unfair+pfn"
    assert bl.BaselineSpec("egr", base_learner="pfn").method_id == "egr"


def test_unknown_kind():
    with pytest.raises(ValueError):
        bl.fit_predict(bl.BaselineSpec("oracle"), _task("direct"))
