"""AdamW with decoupled weight decay and a linear-warmup cosine-decay schedule."""

import math

import numpy as np

from . import kernels


def lr_at(step, schedule):
    """Learning rate at an integer step: linear 0 -> base over the warm-up,
    then cosine base -> 0 over the remaining steps; clamped past the end."""
    base, warmup, total = schedule.base, schedule.warmup_steps, schedule.total_steps
    if step < 0:
        raise ValueError("negative step")
    step = min(step, total)
    if warmup > 0 and step < warmup:
        return base * step / warmup
    if total <= warmup:
        return base
    progress = (step - warmup) / (total - warmup)
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))


class LrSchedule:
    def __init__(self, base, warmup_steps, total_steps):
        self.base = base
        self.warmup_steps = warmup_steps
        self.total_steps = total_steps


class AdamW:
    """Holds per-parameter moment buffers and the step counter.

    `params` is an ordered name -> Tensor mapping; update order follows it, so
    runs are reproducible. Weight decay is applied to the parameter directly,
    never folded into the gradient.
    """

    def __init__(self, params, schedule, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01):
        self.params = dict(params)
        self.schedule = schedule
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.moments = {
            name: (np.zeros_like(p.data), np.zeros_like(p.data))
            for name, p in self.params.items()
        }

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        """One update over all parameters that received a gradient."""
        self.t += 1
        lr = lr_at(self.t, self.schedule)
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            m, v = self.moments[name]
            kernels.adamw_update(
                p.data.reshape(-1), np.ascontiguousarray(p.grad.reshape(-1)),
                m.reshape(-1), v.reshape(-1),
                lr, self.beta1, self.beta2, self.eps, self.weight_decay, bc1, bc2)
        return lr

    def state_arrays(self, prefix="opt"):
        out = {f"{prefix}.t": np.array([self.t], dtype=np.int64)}
        for name, (m, v) in self.moments.items():
            out[f"{prefix}.m.{name}"] = m
            out[f"{prefix}.v.{name}"] = v
        return out

    def load_state_arrays(self, arrays, prefix="opt"):
        self.t = int(arrays[f"{prefix}.t"][0])
        for name in self.moments:
            self.moments[name] = (arrays[f"{prefix}.m.{name}"].copy(),
                                  arrays[f"{prefix}.v.{name}"].copy())
