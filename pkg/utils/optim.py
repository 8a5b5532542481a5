"""
Adam optimizer and the warm-up / inverse square root learning-rate schedule
"""
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from utils.autodiff import ShapeError, Tensor


@dataclass
class AdamState:
    """Per-parameter moment buffers and the shared step counter"""
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def ensure(self, params: Sequence[Tensor]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p.values) for p in params]
            self.v = [np.zeros_like(p.values) for p in params]
        if len(self.m) != len(params):
            raise ShapeError(f"adam_step: state tracks {len(self.m)} parameters, got {len(params)}")
        for p, m in zip(params, self.m):
            if m.shape != p.shape:
                raise ShapeError(f"adam_step: moment shape {m.shape} does not match parameter shape {p.shape}")


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place"""
    if lr <= 0:
        raise ValueError(f"adam_step: learning rate must be positive, got {lr}")
    if len(params) != len(grads):
        raise ShapeError(f"adam_step: {len(params)} parameters but {len(grads)} gradients")
    state.ensure(params)

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad.shape != param.shape:
            raise ShapeError(f"adam_step: gradient shape {grad.shape} does not match parameter shape {param.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad * grad
        m_hat = state.m[i] / bias1
        v_hat = state.v[i] / bias2
        param.values -= lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float
    warmup_steps: int

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ValueError(f"LrSchedule: base_lr must be positive, got {self.base_lr}")
        if self.warmup_steps < 1:
            raise ValueError(f"LrSchedule: warmup_steps must be >= 1, got {self.warmup_steps}")


def lr_at(schedule: LrSchedule, t: int) -> float:
    """Linear warm-up to base_lr, then decay with the inverse square root of the step"""
    if t < 1:
        raise ValueError(f"lr_at: step must be >= 1, got {t}")
    warmup = schedule.warmup_steps
    return schedule.base_lr * min(t / warmup, math.sqrt(warmup / t))


def collect_grads(params: Sequence[Tensor], divisor: float = 1.0) -> List[np.ndarray]:
    """Gradient buffers for ``params`` (zeros where nothing flowed), divided by ``divisor``"""
    return [(p.grad if p.grad is not None else np.zeros_like(p.values)) / divisor for p in params]
