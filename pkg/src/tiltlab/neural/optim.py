"""AdamW with decoupled weight decay, global-norm clipping, Noam schedule."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, NumericalError
from .tensor import Parameter

DEFAULT_CLIP_NORM = 0.25


def noam_lr(step: int, model_size: int, warmup: int = 4000) -> float:
    """model_size^-0.5 * min(step^-0.5, step * warmup^-1.5).

    Linear ramp to the peak at ``warmup``, inverse square root after.
    """
    if step < 1:
        raise ConfigError("schedule steps start at 1")
    return model_size ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so the global norm is at most max_norm.

    Returns the pre-clip global norm.
    """
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum())
                              for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray], state: dict,
               lr: float, beta1: float = 0.9, beta2: float = 0.98,
               eps: float = 1e-9, weight_decay: float = 0.01,
               clip_norm: float = DEFAULT_CLIP_NORM) -> list[np.ndarray]:
    """One bias-corrected AdamW update; mutates params in place.

    Clipping runs first on the raw gradients. Weight decay is decoupled:
    theta -= lr * wd * theta, separate from the moment-driven step, both
    computed from the pre-update parameters.
    """
    for i, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            raise NumericalError(
                f"non-finite gradient in parameter {i} "
                f"(min={np.nanmin(g)}, max={np.nanmax(g)}); step aborted"
            )
    clip_gradients(grads, clip_norm)
    if "m" not in state:
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
        state["step"] = 0
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + eps)
        if weight_decay > 0:
            update = update + weight_decay * p
        p -= (lr * update).astype(p.dtype)
    return params


class AdamW:
    """Stateful wrapper around adamw_step for a fixed parameter list.

    Parameters with requires_grad=False are excluded at construction, which
    is how frozen encoders receive exactly zero updates.
    """

    def __init__(self, params: list[Parameter], beta1: float = 0.9,
                 beta2: float = 0.98, eps: float = 1e-9,
                 weight_decay: float = 0.01,
                 clip_norm: float = DEFAULT_CLIP_NORM):
        self.params = [p for p in params if p.requires_grad]
        self.hp = dict(beta1=beta1, beta2=beta2, eps=eps,
                       weight_decay=weight_decay, clip_norm=clip_norm)
        self.state: dict = {}

    def step(self, lr: float) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                 for p in self.params]
        adamw_step([p.data for p in self.params], grads, self.state, lr,
                   **self.hp)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
