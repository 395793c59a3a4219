from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairpfn.model import (Checkpoint, CheckpointError, ModelConfig, TrainConfig, bce, encode,
                           init_params, load, predict, prior_fit, read_header, save)
from fairpfn.prior import PriorRanges

TINY = ModelConfig(n_layers=2, n_heads=2, d_model=16, d_ff=32, max_slots=6)


@pytest.fixture(scope="module")
def ck():
    return Checkpoint(TINY, init_params(TINY, 3), {"steps": 0})


def _table(rng, n, m=2):
    A = rng.integers(0, 2, n)
    X = rng.normal(size=(n, m)) + A[:, None]
    y = (A + X.sum(axis=1) + rng.normal(size=n) > 0.5).astype(int)
    return A, X, y


def test_encode_normalizes_from_context():
    ctx = np.array([[0.0, 3.0], [1.0, 7.0]])
    qry = np.array([[0.0, 7.0]])
    b = encode(ctx, qry, [0, 1], max_slots=4)
    assert b.mean[1] == 5.0 and b.scale[1] == 2.0
    assert b.query[0, 1] == 1.0


def test_encode_pads_with_zero_and_indicator():
    b = encode(np.ones((3, 2)) * [[0], [1], [2]], np.zeros((1, 2)), [0, 1, 0], max_slots=5)
    assert np.all(b.context[:, 2:5] == 0.0)
    assert np.all(b.context[:, 5 + 2:] == 1.0) and np.all(b.context[:, 5:7] == 0.0)


def test_encode_constant_column_gets_unit_scale():
    ctx = np.column_stack([[0, 1, 0], [4.0, 4.0, 4.0]])
    b = encode(ctx, ctx, [0, 1, 0], max_slots=3)
    assert b.scale[1] == 1.0 and np.all(b.context[:, 1] == 0.0)


def test_encode_rejects_too_many_features():
    with pytest.raises(ValueError):
        encode(np.zeros((2, 4)), np.zeros((1, 4)), [0, 1], max_slots=3)
    with pytest.raises(ValueError):
        encode(np.zeros((2, 2)), np.zeros((1, 3)), [0, 1], max_slots=5)


def test_attention_mask_pattern():
    b = encode(np.zeros((3, 2)), np.zeros((2, 2)), [0, 1, 0], max_slots=3)
    m = b.attention_mask()
    assert m[:, :3].all() and not m[:, 3:].any()


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_model=10, n_heads=4).validate()
    with pytest.raises(ValueError):
        ModelConfig(max_slots=2).validate()
    with pytest.raises(ValueError):
        TrainConfig(steps=0).validate()


def test_predictions_are_probabilities_and_shape(ck, rng):
    A, X, y = _table(rng, 40)
    p = predict(ck, (A[:30], X[:30], y[:30]), (A[30:], X[30:]))
    assert p.shape == (10,) and np.all((p > 0) & (p < 1))


def test_duplicate_queries_get_identical_outputs(ck, rng):
    A, X, y = _table(rng, 30)
    qa, qx = np.r_[A[:3], A[:3]], np.r_[X[:3], X[:3]]
    p = predict(ck, (A, X, y), (qa, qx))
    # BLAS row blocking can move the last bit
    assert np.max(np.abs(p[:3] - p[3:])) < 1e-14


def test_context_permutation_invariance(ck, rng):
    A, X, y = _table(rng, 50)
    q = (A[40:], X[40:])
    base = predict(ck, (A[:40], X[:40], y[:40]), q)
    perm = rng.permutation(40)
    shuffled = predict(ck, (A[:40][perm], X[:40][perm], y[:40][perm]), q)
    assert np.max(np.abs(base - shuffled)) < 1e-10


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_query_permutation_equivariance(ck, seed):
    rng = np.random.default_rng(seed)
    A, X, y = _table(rng, 40)
    if y[:25].min() == y[:25].max():
        y[0] = 1 - y[0]
    perm = rng.permutation(15)
    base = predict(ck, (A[:25], X[:25], y[:25]), (A[25:], X[25:]))
    shuffled = predict(ck, (A[:25], X[:25], y[:25]), (A[25:][perm], X[25:][perm]))
    assert np.max(np.abs(base[perm] - shuffled)) < 1e-10


@settings(max_examples=15)
@given(st.integers(2, 60), st.integers(1, 30), st.integers(0, 5))
def test_output_length_matches_queries(ck, n_ctx, n_q, m):
    rng = np.random.default_rng(n_ctx * 100 + n_q)
    A, X, y = _table(rng, n_ctx + n_q, m)
    assert predict(ck, (A[:n_ctx], X[:n_ctx], y[:n_ctx]), (A[n_ctx:], X[n_ctx:])).shape == (n_q,)


def test_pad_invariance(ck, rng):
    """Extra slots whose embedding rows are zero leave predictions unchanged."""
    A, X, y = _table(rng, 40)
    base = predict(ck, (A[:30], X[:30], y[:30]), (A[30:], X[30:]))
    s, extra = TINY.max_slots, 3
    w = ck.params["embed.w"]
    zeros = np.zeros((extra, w.shape[1]))
    wide = np.vstack([w[:s], zeros, w[s:], zeros])
    params = OrderedDict((k, wide if k == "embed.w" else v) for k, v in ck.params.items())
    cfg = ModelConfig(**{**TINY.to_dict(), "max_slots": s + extra, "context_fraction": TINY.context_fraction})
    padded = predict(Checkpoint(cfg, params), (A[:30], X[:30], y[:30]), (A[30:], X[30:]))
    assert np.max(np.abs(base - padded)) < 1e-12


def test_single_class_context_falls_back_to_rate(ck, rng):
    A, X, _ = _table(rng, 20)
    p = predict(ck, (A[:10], X[:10], np.ones(10, int)), (A[10:], X[10:]))
    assert np.allclose(p, 11 / 12)


def test_feature_count_mismatch(ck, rng):
    A, X, y = _table(rng, 20)
    with pytest.raises(ValueError):
        predict(ck, (A, X, y), (A, X[:, :1]))


def test_max_context_subsampling_is_deterministic(ck, rng):
    A, X, y = _table(rng, 80)
    a = predict(ck, (A, X, y), (A[:5], X[:5]), max_context=20, seed=4)
    b = predict(ck, (A, X, y), (A[:5], X[:5]), max_context=20, seed=4)
    assert np.array_equal(a, b)


def test_bce_examples(rng):
    assert bce(np.array([1.0, 0.0]), np.array([1, 0])) == pytest.approx(0.0, abs=1e-11)
    assert bce(np.full(4, 0.5), np.array([0, 1, 1, 0])) == pytest.approx(np.log(2), abs=1e-15)
    p, y = rng.uniform(0.01, 0.99, 50), rng.integers(0, 2, 50)
    total = 0.0
    for pi, yi in zip(p, y):
        total += -np.log(pi) if yi == 1 else -np.log(1 - pi)
    assert abs(bce(p, y) - total / 50) < 1e-12
    with pytest.raises(ValueError):
        bce(p, y[:3])


def test_checkpoint_round_trip(ck, tmp_path, rng):
    A, X, y = _table(rng, 30)
    before = predict(ck, (A[:20], X[:20], y[:20]), (A[20:], X[20:]))
    path = save(ck, tmp_path / "m.fpfn")
    loaded = load(path)
    after = predict(loaded, (A[:20], X[:20], y[:20]), (A[20:], X[20:]))
    assert before.tobytes() == after.tobytes()
    assert loaded.weight_hash() == ck.weight_hash()
    assert loaded.config == ck.config


def test_truncated_checkpoint_is_rejected(ck, tmp_path):
    path = save(ck, tmp_path / "m.fpfn")
    raw = path.read_bytes()
    path.write_bytes(raw[:-16])
    with pytest.raises(CheckpointError, match="expected .* bytes, got"):
        load(path)
    path.write_bytes(raw[:10])
    with pytest.raises(CheckpointError):
        load(path)
    path.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(CheckpointError, match="magic"):
        load(path)


def test_unknown_version_is_rejected(ck, tmp_path):
    import json
    import struct
    path = save(ck, tmp_path / "m.fpfn")
    raw = path.read_bytes()
    (size,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + size])
    header["version"] = 99
    new = json.dumps(header).encode()
    path.write_bytes(raw[:8] + struct.pack("<I", len(new)) + new + raw[12 + size:])
    with pytest.raises(CheckpointError, match="version"):
        load(path)


def test_header_only_inspection(ck, tmp_path):
    path = save(ck, tmp_path / "m.fpfn")
    raw = path.read_bytes()
    path.write_bytes(raw[:len(raw) // 2])   # weights no longer readable
    header = read_header(path)
    assert header["model_config"]["d_model"] == 16
    assert header["weights"][0]["name"] == "embed.w"


SMALL_PRIOR = PriorRanges(samples=(100, 200), features=(1, 4))


def _tiny_train(steps, target="fair", seed=0, per_step=2):
    model = ModelConfig(**{**TINY.to_dict(), "target_mode": target, "context_fraction": (0.3, 0.8)})
    return prior_fit(TrainConfig(steps=steps, datasets_per_step=per_step, base_lr=3e-3, seed=seed,
                                 prior=SMALL_PRIOR, model=model))


def test_training_is_deterministic_and_target_sensitive():
    a, b = _tiny_train(3), _tiny_train(3)
    assert a.weight_hash() == b.weight_hash()
    assert _tiny_train(3, target="biased").weight_hash() != a.weight_hash()
    assert a.metadata["method_id"] == "fairpfn"


def test_smoke_training_reduces_loss():
    ck = _tiny_train(200, per_step=4)
    curve = ck.metadata["loss_curve"]
    assert len(curve) == 200
    assert np.mean(curve[-10:]) < np.mean(curve[:10])
