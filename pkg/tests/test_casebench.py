import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpfn import casebench as cb
from fairpfn.baselines import logistic_fit
from fairpfn.metrics import de_ie, tce


def _cfg(case, w=2.0, n=500, sigma=0.3, seed=1):
    return cb.CaseStudyConfig(case=case, w_A=w, n=n, sigma=sigma, seed=seed)


configs = st.builds(
    cb.CaseStudyConfig, case=st.sampled_from(cb.CASES), w_A=st.floats(0.1, 10.0),
    n=st.integers(100, 1000), sigma=st.floats(1e-3, 1.0), seed=st.integers(0, 2**40),
)


@pytest.mark.parametrize("bad", [dict(n=99), dict(n=1001), dict(sigma=0.0), dict(sigma=1.5), dict(case="nope")])
def test_invalid_config_is_rejected(bad):
    with pytest.raises(ValueError):
        cb.generate_case(cb.CaseStudyConfig(**{**_cfg("direct").__dict__, **bad}))


@pytest.mark.parametrize("case", cb.CASES)
def test_zero_weight_makes_counterfactual_equal_factual(case):
    inst = cb.generate_case(_cfg(case, w=0.0))
    assert np.array_equal(inst.factual.X, inst.counterfactual.X)
    assert np.array_equal(inst.factual.y, inst.counterfactual.y)
    assert np.array_equal(inst.factual.y, inst.fair_info.y_fair)


def test_level_three_noise_is_recoverable():
    inst = cb.generate_case(_cfg("level3", w=3.0, sigma=1e-3))
    recovered = inst.factual.X[:, 0] - 3.0 * inst.factual.A
    assert np.max(np.abs(recovered - inst.fair_info.columns["eps_x1"])) < 1e-12


def _direct_te_oracle(seed, batches=100, n=1000, w=2.0, sigma=0.1):
    """Independent Monte-Carlo TE of the Direct case on hard labels, 10^5 draws.

    The median threshold is taken per batch of ``n`` rows, as in an instance.
    """
    rng = np.random.default_rng(seed)
    te = []
    for _ in range(batches):
        a = rng.integers(0, 2, n)
        x, ey = rng.normal(0, sigma, n), rng.normal(0, sigma, n)
        cut = np.median(w * a + x + ey)
        te.append(np.mean((w + x + ey > cut).astype(float) - (x + ey > cut)))
    return float(np.mean(te))


def test_direct_case_total_effect_matches_monte_carlo_oracle():
    oracle = [_direct_te_oracle(s) for s in range(3)]
    assert min(oracle) > 0 and max(oracle) - min(oracle) < 0.01
    effects = []
    for seed in range(100):
        inst = cb.generate_case(_cfg("direct", w=2.0, n=1000, sigma=0.1, seed=seed))
        effects.append(tce(inst.factual.y, inst.counterfactual.y, inst.factual.A))
    assert abs(np.mean(effects) - np.mean(oracle)) < 0.01


def test_suite_counts_hashes_and_sigma_range(tmp_path):
    m = cb.generate_suite(tmp_path / "a", count_per_case=4, seed=3)
    assert len(m["instances"]) == 24
    assert {c: sum(e["case"] == c for e in m["instances"]) for c in cb.CASES} == dict.fromkeys(cb.CASES, 4)
    assert all(1e-3 <= e["sigma"] < 1 for e in m["instances"])
    assert all(0.1 <= e["w_A"] <= 10 and 100 <= e["n"] <= 1000 for e in m["instances"])
    again = cb.generate_suite(tmp_path / "b", count_per_case=4, seed=3)
    assert again["manifest_hash"] == m["manifest_hash"]


def test_default_suite_size_is_six_hundred():
    import inspect
    assert inspect.signature(cb.generate_suite).parameters["count_per_case"].default == 100
    assert len(cb.CASES) * 100 == 600


def test_sampled_sigmas_are_floored():
    sig = [cb.sample_config(c, i, 0).sigma for c in cb.CASES for i in range(300)]
    assert min(sig) >= 1e-3 and max(sig) < 1


def test_suite_refuses_to_overwrite(tmp_path):
    cb.generate_suite(tmp_path, count_per_case=1)
    with pytest.raises(FileExistsError):
        cb.generate_suite(tmp_path, count_per_case=1)
    cb.generate_suite(tmp_path, count_per_case=1, overwrite=True)
    with pytest.raises(ValueError):
        cb.generate_suite(tmp_path / "x", count_per_case=0)


def test_suite_round_trip(tmp_path):
    m = cb.generate_suite(tmp_path, count_per_case=1, seed=5)
    for entry in m["instances"]:
        loaded = cb.load_instance(tmp_path, entry)
        inst = cb.generate_case(cb.sample_config(entry["case"], 0, 5))
        assert loaded.factual.same_values(inst.factual)
        assert loaded.counterfactual.same_values(inst.counterfactual)
        assert np.array_equal(loaded.fair_info.y_fair, inst.fair_info.y_fair)
        assert set(loaded.fair_info.columns) == set(inst.fair_info.columns)
        assert (loaded.direct_twin is not None) == inst.direct_twin.present
        assert (loaded.indirect_twin is not None) == inst.indirect_twin.present
    assert json.loads((tmp_path / "manifest.json").read_text())["count_per_case"] == 1


def test_path_twin_presence():
    d_twin, i_twin = cb.path_twins(cb.generate_case(_cfg("indirect")))
    assert not d_twin.present and i_twin.present
    d_twin, i_twin = cb.path_twins(cb.generate_case(_cfg("direct")))
    assert d_twin.present and not i_twin.present
    assert not cb.path_twins(cb.generate_case(_cfg("biased")))[0].present


def test_absent_path_twins_equal_factual():
    inst = cb.generate_case(_cfg("indirect"))
    assert inst.direct_twin.dataset.same_values(inst.factual)
    inst = cb.generate_case(_cfg("direct"))
    assert inst.indirect_twin.dataset.same_values(inst.factual)


def test_indirect_twin_shifts_mediator_by_weight():
    inst = cb.generate_case(_cfg("indirect", w=2.5))
    shift = inst.indirect_twin.dataset.X[:, 1] - inst.factual.X[:, 1]
    expect = np.where(inst.factual.A == 0, 2.5, -2.5)
    assert np.max(np.abs(shift - expect)) < 1e-12
    assert np.array_equal(inst.indirect_twin.dataset.X[:, 0], inst.factual.X[:, 0])


def test_direct_twin_flips_group_but_holds_features():
    inst = cb.generate_case(_cfg("direct"))
    twin = inst.direct_twin.dataset
    assert np.array_equal(twin.A, 1 - inst.factual.A)
    assert np.array_equal(twin.X, inst.factual.X)


@settings(max_examples=25)
@given(configs)
def test_twin_involution(cfg):
    inst = cb.generate_case(cfg)
    back = cb.replay(inst, inst.counterfactual.A)
    assert back.same_values(inst.counterfactual)
    twice = cb.replay(inst, 1 - inst.counterfactual.A)
    assert twice.same_values(inst.factual)


@settings(max_examples=25)
@given(configs)
def test_fair_info_columns_follow_the_graph(cfg):
    inst = cb.generate_case(cfg)
    expected = {
        "biased": set(), "level1": set(), "direct": {"nd_x1", "eps_x1"},
        "indirect": {"nd_x1", "eps_x1", "eps_x2"}, "level2": {"u_u", "eps_x1"}, "level3": {"eps_x1"},
    }[cfg.case]
    assert set(inst.fair_info.columns) == expected
    for name, col in inst.fair_info.columns.items():
        if name.startswith("nd_"):
            # non-descendant columns are untouched by the flip
            j = int(name[4:]) - 1
            assert np.array_equal(col, inst.counterfactual.X[:, j])


@pytest.mark.parametrize("case", ["direct", "indirect"])
def test_non_descendant_predictor_has_zero_effect(case):
    inst = cb.generate_case(_cfg(case))
    cols = inst.fair_info.level_columns("level1")
    feats = inst.fair_info.matrix(cols)
    model = logistic_fit(feats, inst.factual.y)
    p = model.predict_proba(feats)
    assert tce(p, p, inst.factual.A) == 0.0


def test_applicability_table():
    assert {c for c in cb.CASES if cb.applicable("level1", c)} == {"direct", "indirect"}
    assert {c for c in cb.CASES if cb.applicable("level2", c)} == {"direct", "indirect", "level2"}
    assert {c for c in cb.CASES if cb.applicable("level3", c)} == {"direct", "indirect", "level2", "level3"}
    assert cb.applicable("level3", "law") and not cb.applicable("level1", "adult")


def test_effect_composition_for_linear_logistic_predictors():
    inst = cb.generate_case(_cfg("direct", n=1000, seed=4))
    f = inst.factual
    model = logistic_fit(np.column_stack([f.A, f.X]), f.y)
    score = lambda ds: model.predict_proba(np.column_stack([ds.A, ds.X]))
    te = tce(score(f), score(inst.counterfactual), f.A)
    de, ie = de_ie(score(f), score(inst.direct_twin.dataset), score(inst.indirect_twin.dataset), f.A)
    assert ie == 0.0 and abs(te - (de + ie)) < 0.02

    inst = cb.generate_case(_cfg("indirect", n=1000, seed=4))
    f = inst.factual
    model = logistic_fit(f.X, f.y)
    score = lambda ds: model.predict_proba(ds.X)
    te = tce(score(f), score(inst.counterfactual), f.A)
    de, ie = de_ie(score(f), score(inst.direct_twin.dataset), score(inst.indirect_twin.dataset), f.A)
    assert de == 0.0 and abs(te - (de + ie)) < 0.02


def test_generation_is_deterministic():
    a, b = cb.generate_case(_cfg("level2")), cb.generate_case(_cfg("level2"))
    assert a.factual.digest() == b.factual.digest()
    assert a.counterfactual.digest() == b.counterfactual.digest()


@settings(max_examples=25)
@given(configs)
def test_labels_are_balanced_by_median(cfg):
    inst = cb.generate_case(cfg)
    rate = inst.factual.y.mean()
    assert 0 < rate < 1
    assert set(np.unique(inst.factual.A)) <= {0, 1}
