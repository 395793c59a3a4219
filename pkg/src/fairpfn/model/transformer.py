"""PFN transformer over rows: context rows carry labels, query rows do not,
and every row attends to the context rows only."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import numcore as nc
from ..rng import stream


@dataclass
class ModelConfig:
    n_layers: int = 4
    n_heads: int = 4
    d_model: int = 128
    d_ff: int = 256
    max_slots: int = 11
    context_fraction: tuple = (0.3, 0.8)
    target_mode: str = "fair"

    def validate(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_slots < 3:
            raise ValueError("max_slots must be >= 3")
        if self.target_mode not in ("fair", "biased"):
            raise ValueError(f"target_mode must be 'fair' or 'biased', got {self.target_mode!r}")
        return self

    def to_dict(self):
        d = asdict(self)
        d["context_fraction"] = list(self.context_fraction)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["context_fraction"] = tuple(d.get("context_fraction", (0.3, 0.8)))
        return cls(**d)


def init_params(config, seed):
    """Ordered name -> float64 array; the order is the checkpoint blob order."""
    cfg = config.validate()
    rng = stream(seed, "init")
    d, f, s = cfg.d_model, cfg.d_ff, cfg.max_slots
    out_scale = 1.0 / np.sqrt(2.0 * cfg.n_layers)

    def dense(fan_in, fan_out, scale=1.0):
        return rng.normal(0.0, scale / np.sqrt(fan_in), (fan_in, fan_out))

    p = OrderedDict()
    p["embed.w"] = dense(2 * s, d)
    p["embed.b"] = np.zeros(d)
    p["label.emb"] = rng.normal(0.0, 1.0, (3, d))   # rows: label 0, label 1, missing
    for i in range(cfg.n_layers):
        pre = f"layer{i}."
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        p[pre + "attn.wq"] = dense(d, d)
        p[pre + "attn.wk"] = dense(d, d)
        p[pre + "attn.wv"] = dense(d, d)
        p[pre + "attn.wo"] = dense(d, d, out_scale)
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "ff.w1"] = dense(d, f)
        p[pre + "ff.b1"] = np.zeros(f)
        p[pre + "ff.w2"] = dense(f, d, out_scale)
        p[pre + "ff.b2"] = np.zeros(d)
    p["final.ln.g"] = np.ones(d)
    p["final.ln.b"] = np.zeros(d)
    p["head.w"] = dense(d, 1, 0.1)
    p["head.b"] = np.zeros(1)
    return p


def as_tensors(params, requires_grad=False):
    return OrderedDict((k, nc.Tensor(v, requires_grad=requires_grad)) for k, v in params.items())


def attention(h, n_ctx, wq, wk, wv, wo, n_heads):
    """Multi-head attention where all rows of ``h`` attend to its first ``n_ctx`` rows."""
    n, d = h.shape
    dh = d // n_heads
    ctx = h[:n_ctx]
    q = ((h @ wq) * (1.0 / np.sqrt(dh))).reshape(n, n_heads, dh).transpose(1, 0, 2)
    k = (ctx @ wk).reshape(n_ctx, n_heads, dh).transpose(1, 2, 0)
    v = (ctx @ wv).reshape(n_ctx, n_heads, dh).transpose(1, 0, 2)
    scores = nc.softmax(q @ k, axis=-1)
    out = (scores @ v).transpose(1, 0, 2).reshape(n, d)
    return out @ wo


def block(h, n_ctx, p, prefix, n_heads):
    """One pre-norm transformer layer (attention + GELU feed-forward)."""
    a = nc.layer_norm(h, p[prefix + "ln1.g"], p[prefix + "ln1.b"])
    h = h + attention(a, n_ctx, p[prefix + "attn.wq"], p[prefix + "attn.wk"],
                      p[prefix + "attn.wv"], p[prefix + "attn.wo"], n_heads)
    f = nc.layer_norm(h, p[prefix + "ln2.g"], p[prefix + "ln2.b"])
    f = nc.gelu(f @ p[prefix + "ff.w1"] + p[prefix + "ff.b1"]) @ p[prefix + "ff.w2"] + p[prefix + "ff.b2"]
    return h + f


def forward(p, config, batch):
    """Query logits (n_query,) for an :class:`EncodedBatch`; ``p`` maps names to Tensors."""
    n_ctx = batch.n_context
    tokens = np.concatenate([batch.context, batch.query], axis=0)
    label_idx = np.concatenate([batch.context_labels, np.full(len(batch.query), 2)])
    onehot = np.eye(3)[label_idx]
    h = nc.Tensor(tokens) @ p["embed.w"] + p["embed.b"] + nc.Tensor(onehot) @ p["label.emb"]
    for i in range(config.n_layers):
        h = block(h, n_ctx, p, f"layer{i}.", config.n_heads)
    h = nc.layer_norm(h[n_ctx:], p["final.ln.g"], p["final.ln.b"])
    return (h @ p["head.w"] + p["head.b"]).reshape(-1)


def param_count(params):
    return int(sum(v.size for v in params.values()))
