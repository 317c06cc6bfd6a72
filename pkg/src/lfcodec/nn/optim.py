"""Adam optimiser."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import TrainingDiverged


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    v: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              maximize: bool = False) -> None:
    """Bias-corrected Adam update, in place. ``maximize`` ascends instead."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for i, (p, g) in enumerate(zip(params, grads)):
        if maximize:
            g = -g
        m = state.m.setdefault(i, np.zeros_like(p))
        v = state.v.setdefault(i, np.zeros_like(p))
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def step_pairs(pairs, state: AdamState,
               maximize: bool = False) -> None:
    pairs = list(pairs)
    adam_step([p for p, _ in pairs], [g for _, g in pairs], state, maximize=maximize)


def cosine_lr(lr0: float, lr1: float, step: int, steps: int) -> float:
    t = step / max(steps - 1, 1)
    return lr1 + 0.5 * (lr0 - lr1) * (1 + np.cos(np.pi * t))
