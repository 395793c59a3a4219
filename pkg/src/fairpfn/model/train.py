"""Prior-fitting: train the transformer on freshly sampled biased/fair pairs."""
from __future__ import annotations

import logging
import time
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .. import numcore as nc
from ..prior import PriorRanges, sample_pair
from ..rng import stream
from .checkpoint import Checkpoint
from .encode import columns, encode
from .transformer import ModelConfig, as_tensors, forward, init_params, param_count

log = logging.getLogger(__name__)

MAX_SKIP_FRACTION = 0.01


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    steps: int = 3000
    datasets_per_step: int = 8
    base_lr: float = 3e-4
    warmup_fraction: float = 0.05
    floor_lr: float = 1e-5
    seed: int = 0
    prior: PriorRanges = field(default_factory=PriorRanges)
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self):
        if self.steps < 1 or self.datasets_per_step < 1:
            raise ValueError("steps and datasets_per_step must be >= 1")
        self.prior.validate()
        self.model.validate()
        return self

    def schedule(self):
        return nc.ScheduleConfig(base_lr=self.base_lr, total_steps=self.steps,
                                 warmup_fraction=self.warmup_fraction, floor_lr=self.floor_lr)

    def to_dict(self):
        return {
            "steps": self.steps, "datasets_per_step": self.datasets_per_step,
            "base_lr": self.base_lr, "warmup_fraction": self.warmup_fraction,
            "floor_lr": self.floor_lr, "seed": self.seed,
            "prior": self.prior.to_dict(), "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        prior = PriorRanges.from_dict(d.pop("prior", {}))
        model = ModelConfig.from_dict(d.pop("model", {}))
        return cls(prior=prior, model=model, **d)


def training_task(seed, step, index, prior, model_cfg):
    """One (encoded batch, targets) example; a pure function of its indices."""
    pair = sample_pair(int(stream(seed, "data", step, index).integers(2**62)), prior)
    rng = stream(seed, "split", step, index)
    n = pair.biased.n
    frac = rng.uniform(*model_cfg.context_fraction)
    n_ctx = int(np.clip(round(frac * n), 2, n - 1))
    order = rng.permutation(n)
    ctx, qry = order[:n_ctx], order[n_ctx:]
    feats = columns(pair.biased.A, pair.biased.X)
    batch = encode(feats[ctx], feats[qry], pair.biased.y[ctx], model_cfg.max_slots)
    target = pair.fair.y if model_cfg.target_mode == "fair" else pair.biased.y
    return batch, target[qry].astype(np.float64)


def prior_fit(config, progress=None):
    """Train from scratch and return a :class:`Checkpoint`.

    ``progress`` is called as ``progress(step, mean_loss, lr)`` after every
    optimizer step.
    """
    cfg = config.validate()
    mcfg = cfg.model
    params = as_tensors(init_params(mcfg, cfg.seed), requires_grad=True)
    plist = list(params.values())
    state = nc.AdamState(schedule=cfg.schedule())
    losses, skipped, seen = [], 0, 0
    t0 = time.time()
    log.info("prior-fitting %d parameters for %d steps", param_count(init_params(mcfg, cfg.seed)), cfg.steps)

    for step in range(cfg.steps):
        for p in plist:
            p.zero_grad()
        step_losses = []
        for b in range(cfg.datasets_per_step):
            seen += 1
            batch, target = training_task(cfg.seed, step, b, cfg.prior, mcfg)
            logits = forward(params, mcfg, batch)
            loss = nc.bce_with_logits(logits, target)
            if not np.isfinite(loss.data):
                skipped += 1
                log.warning("step %d dataset %d: non-finite loss, skipped", step, b)
                if seen >= 100 and skipped > MAX_SKIP_FRACTION * seen:
                    raise TrainingAborted(f"{skipped} of {seen} datasets had non-finite loss")
                continue
            nc.backward(loss, np.asarray(1.0 / cfg.datasets_per_step))
            step_losses.append(float(loss.data))
        lr = nc.lr_at(state.step, state.schedule)
        if step_losses and not nc.adam_step(state, plist):
            log.warning("step %d: non-finite gradient, update rejected", step)
        mean_loss = float(np.mean(step_losses)) if step_losses else float("nan")
        losses.append(mean_loss)
        if progress is not None:
            progress(step, mean_loss, lr)

    meta = {
        "steps": cfg.steps, "seed": cfg.seed, "train_config": cfg.to_dict(),
        "method_id": "fairpfn" if mcfg.target_mode == "fair" else "pfn-unfair",
        "skipped_datasets": skipped, "loss_curve": [round(x, 6) for x in losses],
    }
    log.info("prior-fitting finished in %.1fs", time.time() - t0)
    return Checkpoint(mcfg, OrderedDict((k, v.data.copy()) for k, v in params.items()), meta)
