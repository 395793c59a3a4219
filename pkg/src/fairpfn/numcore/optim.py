"""Adam with bias correction and a warmup + cosine learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class ScheduleConfig:
    base_lr: float = 1e-3
    total_steps: int = 1000
    warmup_fraction: float = 0.05
    floor_lr: float = 0.0


def lr_at(step, config):
    """Learning rate for a 0-based optimizer step.

    Linear warmup over the first ``warmup_fraction`` of steps, reaching the
    base rate at the first post-warmup step, then cosine decay that hits
    ``floor_lr`` exactly at the final step (``total_steps - 1``).
    """
    if step < 0:
        raise ValueError(f"step must be non-negative, got {step}")
    warmup = int(round(config.warmup_fraction * config.total_steps))
    if step < warmup:
        return config.base_lr * (step + 1) / (warmup + 1)
    span = max(1, config.total_steps - 1 - warmup)
    progress = min(1.0, (step - warmup) / span)
    cos = 0.5 * (1.0 + math.cos(math.pi * progress))
    return config.floor_lr + (config.base_lr - config.floor_lr) * cos


@dataclass
class AdamState:
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(state, params, grads=None):
    """Apply one bias-corrected Adam update in place.

    ``grads`` defaults to each parameter's ``.grad`` (missing grads count as
    zero). Returns False and leaves everything untouched when any gradient
    is non-finite.
    """
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if g.shape != p.data.shape:
            raise ValueError(f"grad shape {g.shape} does not match param {p.data.shape}")
    if not all(np.isfinite(g).all() for g in grads):
        return False
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]

    lr = lr_at(state.step, state.schedule)
    t = state.step + 1
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step = t
    return True
