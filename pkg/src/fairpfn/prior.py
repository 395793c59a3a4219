"""Random MLP-shaped structural causal models with an exogenous binary
protected input, and paired biased/fair datasets drawn from them.

Layer 0 holds the exogenous inputs (one of which is the protected
attribute). Every later node computes ``act((P * W)^T x) + sigma * eps``.
The fair run zeroes every weight leaving the protected input while reusing
the exact same noise, so fair labels are per-individual counterfactual
ground truth.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, read_matrix, write_dataset, write_matrix
from .rng import log_uniform, stream

ACTIVATIONS = ("identity", "tanh", "relu")
OVERFLOW_LIMIT = 1e6
MIN_CLASS_RATE = 0.05


class ScmOverflow(ArithmeticError):
    """A node value left the finite / bounded range; resample the SCM."""


class DegenerateLabels(ValueError):
    """The biased labels stayed single-class after threshold resampling."""


@dataclass(frozen=True)
class PriorRanges:
    hidden_depth: tuple = (2, 5)
    hidden_width: tuple = (4, 32)
    input_width: tuple = (2, 8)
    output_width: tuple = (1, 4)
    features: tuple = (1, 10)
    samples: tuple = (100, 1000)
    keep_prob: tuple = (0.1, 1.0)          # log-uniform
    noise_scale: tuple = (1e-3, 1.0)       # log-uniform, per SCM
    protected_scale: tuple = (0.5, 20.0)   # log-uniform multiplier on protected out-weights
    group_prob: tuple = (0.1, 0.9)
    quantile: tuple = (0.3, 0.7)
    protected_clamp: float = 4.0

    def validate(self):
        for name in ("hidden_depth", "hidden_width", "input_width", "output_width",
                     "features", "samples", "keep_prob", "noise_scale",
                     "protected_scale", "group_prob", "quantile"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"range {name}: min {lo} > max {hi}")
        if self.hidden_depth[1] < 2:
            raise ValueError("hidden_depth must allow at least 2 hidden layers so feature nodes exist")
        if self.input_width[0] < 1 or self.features[0] < 1 or self.samples[0] < 16:
            raise ValueError("input_width, features and samples must be positive (samples >= 16)")
        if not (0 < self.keep_prob[0] and self.keep_prob[1] <= 1):
            raise ValueError("keep_prob must lie in (0, 1]")
        if not (0 < self.quantile[0] and self.quantile[1] < 1):
            raise ValueError("quantile must lie in (0, 1)")
        if not (0 < self.group_prob[0] and self.group_prob[1] < 1):
            raise ValueError("group_prob must lie in (0, 1)")
        return self

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class ScmSpec:
    layer_sizes: list
    weights: list          # weights[l]: (layer_sizes[l], layer_sizes[l+1])
    masks: list            # same shapes, entries in {0, 1}
    activations: list      # activation applied when computing layer l+1
    noise_scales: list     # noise_scales[l]: (layer_sizes[l],); layer 0 is exogenous, scale 1
    protected_index: int
    a0: float
    a1: float
    group_prob: float
    feature_nodes: list    # global node indices, all in layer >= 2
    target_node: int       # global node index in the output layer
    quantile: float
    keep_prob: float = 1.0
    seed: int | None = None

    @property
    def node_count(self):
        return int(sum(self.layer_sizes))

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.layer_sizes)]).astype(int)

    def layer_of(self, node):
        return int(np.searchsorted(self.offsets, node, side="right") - 1)

    def protected_out_weights(self):
        return (self.weights[0] * self.masks[0])[self.protected_index]

    def digest(self):
        h = hashlib.sha256()
        h.update(json.dumps([self.layer_sizes, self.activations, self.protected_index,
                             self.a0, self.a1, self.group_prob, self.feature_nodes,
                             self.target_node, self.quantile]).encode())
        for arr in (*self.weights, *self.masks, *self.noise_scales):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()[:16]


@dataclass
class NoiseDraw:
    groups: np.ndarray     # (n,) in {0, 1}
    eps: np.ndarray        # (n, node_count) standard normal

    def write(self, path):
        cols = [self.groups.astype(float)] + [self.eps[:, j] for j in range(self.eps.shape[1])]
        names = ["group"] + [f"e{j}" for j in range(self.eps.shape[1])]
        return write_matrix(path, cols, names)

    @classmethod
    def read(cls, path):
        cols = read_matrix(path)
        groups = cols.pop("group").astype(np.int64)
        return cls(groups=groups, eps=np.column_stack(list(cols.values())))


@dataclass
class DatasetPair:
    biased: Dataset
    fair: Dataset
    noise: NoiseDraw
    spec: ScmSpec = field(repr=False, default=None)


def sample_scm(seed, ranges=None):
    """Draw a random SCM. Identical ``(seed, ranges)`` give identical specs."""
    ranges = (ranges or PriorRanges()).validate()
    rng = stream(seed, "scm")
    depth = int(rng.integers(max(2, ranges.hidden_depth[0]), ranges.hidden_depth[1] + 1))
    sizes = [int(rng.integers(ranges.input_width[0], ranges.input_width[1] + 1))]
    sizes += [int(rng.integers(ranges.hidden_width[0], ranges.hidden_width[1] + 1)) for _ in range(depth)]
    sizes.append(int(rng.integers(ranges.output_width[0], ranges.output_width[1] + 1)))

    keep = float(log_uniform(rng, *ranges.keep_prob))
    base_sigma = float(log_uniform(rng, *ranges.noise_scale))
    protected_index = int(rng.integers(sizes[0]))

    weights, masks, acts = [], [], []
    for l in range(len(sizes) - 1):
        fan_in = sizes[l]
        w = rng.normal(0.0, 1.0, (fan_in, sizes[l + 1])) / np.sqrt(max(1.0, keep * fan_in))
        mask = (rng.uniform(size=w.shape) < keep).astype(np.float64)
        weights.append(w)
        masks.append(mask)
        acts.append(ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))])
    weights[0][protected_index] *= float(log_uniform(rng, *ranges.protected_scale))

    noise_scales = [np.ones(sizes[0])]
    noise_scales += [base_sigma * log_uniform(rng, 0.5, 2.0, s) for s in sizes[1:]]

    a0, a1 = np.clip(rng.normal(size=2), -ranges.protected_clamp, ranges.protected_clamp)
    group_prob = float(rng.uniform(*ranges.group_prob))

    offsets = np.cumsum([0] + sizes)
    target = int(offsets[-2] + rng.integers(sizes[-1]))
    candidates = [j for j in range(offsets[2], offsets[-1]) if j != target]
    m = int(rng.integers(ranges.features[0], ranges.features[1] + 1))
    m = min(m, len(candidates))
    features = sorted(int(j) for j in rng.choice(candidates, size=m, replace=False))

    return ScmSpec(
        layer_sizes=sizes, weights=weights, masks=masks, activations=acts,
        noise_scales=noise_scales, protected_index=protected_index,
        a0=float(a0), a1=float(a1), group_prob=group_prob,
        feature_nodes=features, target_node=target,
        quantile=float(rng.uniform(*ranges.quantile)), keep_prob=keep, seed=seed,
    )


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def scm_forward(spec, groups, noise, protected_edges_active=True):
    """All node values, shape (n, node_count).

    ``groups`` selects a0/a1 for the protected input; ``noise`` supplies the
    exogenous draws (a :class:`NoiseDraw` or a raw (n, node_count) array).
    """
    eps = noise.eps if isinstance(noise, NoiseDraw) else np.asarray(noise, dtype=np.float64)
    groups = np.asarray(groups)
    if eps.ndim != 2 or eps.shape[1] != spec.node_count or eps.shape[0] < 1:
        raise ValueError(f"noise shape {eps.shape} does not match {spec.node_count} SCM nodes")
    if groups.shape != (eps.shape[0],):
        raise ValueError(f"groups shape {groups.shape} does not match {eps.shape[0]} noise rows")
    off = spec.offsets
    x = eps[:, off[0]:off[1]] * spec.noise_scales[0]
    x = x.copy()
    x[:, spec.protected_index] = np.where(groups == 1, spec.a1, spec.a0)
    layers = [x]
    for l, (w, mask, act) in enumerate(zip(spec.weights, spec.masks, spec.activations)):
        eff = w * mask
        if l == 0 and not protected_edges_active:
            eff = eff.copy()
            eff[spec.protected_index] = 0.0
        x = _act(act, x @ eff) + spec.noise_scales[l + 1] * eps[:, off[l + 1]:off[l + 2]]
        if not np.all(np.isfinite(x)) or np.abs(x).max() > OVERFLOW_LIMIT:
            raise ScmOverflow(f"layer {l + 1} exceeded {OVERFLOW_LIMIT:g}")
        layers.append(x)
    return np.concatenate(layers, axis=1)


def draw_noise(spec, n, seed):
    rng = stream(seed, "noise")
    groups = (rng.uniform(size=n) < spec.group_prob).astype(np.int64)
    eps = rng.normal(size=(n, spec.node_count))
    return NoiseDraw(groups=groups, eps=eps)


def _to_dataset(spec, groups, nodes, threshold, meta):
    y_cont = nodes[:, spec.target_node]
    return Dataset(
        A=groups, X=nodes[:, spec.feature_nodes], y=(y_cont > threshold).astype(np.int64),
        y_cont=y_cont, meta=dict(meta),
    )


def generate_pair(spec, n, seed):
    """Biased and fair datasets sharing one noise draw.

    Labels of both are thresholded at the biased run's ``spec.quantile``
    quantile, so ``fair.y[i]`` is the counterfactual label of individual i.
    """
    if n < 16:
        raise ValueError(f"need at least 16 samples, got {n}")
    noise = draw_noise(spec, n, seed)
    biased_nodes = scm_forward(spec, noise.groups, noise, True)
    fair_nodes = scm_forward(spec, noise.groups, noise, False)
    y_cont = biased_nodes[:, spec.target_node]

    rng = stream(seed, "threshold")
    q = spec.quantile
    for _ in range(6):
        threshold = float(np.quantile(y_cont, q))
        rate = float(np.mean(y_cont > threshold))
        if MIN_CLASS_RATE <= rate <= 1 - MIN_CLASS_RATE:
            break
        q = float(rng.uniform(0.3, 0.7))
    else:
        raise DegenerateLabels(f"minority class below {MIN_CLASS_RATE:.0%} after 5 threshold resamples")

    meta = {"seed": seed, "scm_hash": spec.digest(), "a0": spec.a0, "a1": spec.a1,
            "threshold": threshold, "quantile": q}
    biased = _to_dataset(spec, noise.groups, biased_nodes, threshold, {**meta, "mode": "biased"})
    fair = _to_dataset(spec, noise.groups, fair_nodes, threshold, {**meta, "mode": "fair"})
    return DatasetPair(biased=biased, fair=fair, noise=noise, spec=spec)


def counterfactual_replay(spec, dataset, noise, protected_edges_active=None):
    """Flip every row's group and re-propagate with the stored noise.

    By default the replay uses the mode the dataset was generated in
    (protected edges active for biased data, inactive for fair data).
    """
    if noise is None:
        raise ValueError("counterfactual replay needs the stored noise draw")
    if noise.eps.shape[0] != dataset.n:
        raise ValueError(f"noise has {noise.eps.shape[0]} rows, dataset has {dataset.n}")
    if dataset.meta.get("scm_hash") not in (None, spec.digest()):
        raise ValueError("dataset was not generated from this SCM")
    if protected_edges_active is None:
        protected_edges_active = dataset.meta.get("mode", "biased") != "fair"
    flipped = 1 - dataset.A
    nodes = scm_forward(spec, flipped, noise, protected_edges_active)
    meta = dict(dataset.meta)
    meta["twin_of"] = dataset.meta.get("dataset_id", dataset.digest()[:16])
    return _to_dataset(spec, flipped, nodes, dataset.meta["threshold"], meta)


def sample_pair(seed, ranges=None, n=None, max_attempts=50):
    """Sample an SCM and a pair from it, resampling on overflow or degenerate labels."""
    ranges = (ranges or PriorRanges()).validate()
    for attempt in range(max_attempts):
        spec = sample_scm(_attempt_seed(seed, attempt), ranges)
        size = n
        if size is None:
            size = int(round(log_uniform(stream(seed, attempt, "n"), *ranges.samples)))
        try:
            return generate_pair(spec, size, _attempt_seed(seed, attempt))
        except (ScmOverflow, DegenerateLabels):
            continue
    raise RuntimeError(f"no valid SCM after {max_attempts} attempts for seed {seed}")


def _attempt_seed(seed, attempt):
    return int(stream(seed, attempt, "attempt").integers(2**62))


def export_pair(pair, out_dir, name="pair"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    noise_file = f"{name}.noise.csv"
    pair.noise.write(out / noise_file)
    base = {"noise_file": noise_file}
    write_dataset(pair.biased, out / f"{name}.biased.csv", {**base, "mode": "biased"})
    write_dataset(pair.fair, out / f"{name}.fair.csv",
                  {**base, "mode": "fair", "twin_of": f"{name}.biased.csv"})
    return out
