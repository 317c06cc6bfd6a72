"""One-dimensional two-mode target for exercising the dual-discriminator trainer.

Samples are carried as (N, C, 1, 1) tensors so that 1x1 convolutions act as
dense layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..nn.layers import Conv2d, PReLU, Sequential, Softplus
from .d2gan import D2GanTrainer
from .networks import D2GanConfig, DiscriminatorPair


@dataclass(frozen=True)
class ToyConfig:
    modes: Tuple[float, float] = (-2.0, 2.0)
    spread: float = 0.2
    noise_dim: int = 4
    hidden: int = 32
    batch_size: int = 64
    steps: int = 3000
    lr: float = 1e-3
    alpha: float = 0.2
    beta: float = 0.2
    window: float = 0.5


def mlp(sizes, rng, head=None) -> Sequential:
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(Conv2d(a, b, 1, rng=rng))
        if i < len(sizes) - 2:
            layers.append(PReLU(b))
    if head is not None:
        layers.append(head)
    return Sequential(layers)


def sample_target(n: int, rng: np.random.Generator, cfg: ToyConfig = ToyConfig()) -> np.ndarray:
    centers = np.asarray(cfg.modes)[rng.integers(0, len(cfg.modes), n)]
    return (centers + cfg.spread * rng.standard_normal(n)).reshape(n, 1, 1, 1)


def mode_mass(samples: np.ndarray, cfg: ToyConfig = ToyConfig()) -> List[float]:
    """Fraction of samples within ``cfg.window`` of each mode."""
    x = np.ravel(samples)
    return [float(np.mean(np.abs(x - m) <= cfg.window)) for m in cfg.modes]


def train_toy(cfg: ToyConfig = ToyConfig(), seed: int = 0
              ) -> Tuple[Sequential, List[Dict[str, float]]]:
    """Adversarial-only training of a small generator on the two-mode target."""
    rng = np.random.default_rng(seed)
    gen = mlp([cfg.noise_dim, cfg.hidden, cfg.hidden, 1], rng)
    disc = DiscriminatorPair(
        d1=mlp([1, cfg.hidden, cfg.hidden, 1], rng, Softplus()),
        d2=mlp([1, cfg.hidden, cfg.hidden, 1], rng, Softplus()))
    gcfg = D2GanConfig(alpha=cfg.alpha, beta=cfg.beta, lr=cfg.lr, batch_size=cfg.batch_size)
    trainer = D2GanTrainer(gen, disc, gcfg, content_loss=False)
    rows = []
    for step in range(cfg.steps):
        z = rng.standard_normal((cfg.batch_size, cfg.noise_dim, 1, 1))
        rec = trainer.step(z, sample_target(cfg.batch_size, rng, cfg))
        rec["step"] = step
        rows.append(rec)
    return gen, rows


def generate(gen: Sequential, n: int, seed: int = 1, noise_dim: int = 4) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return gen.forward(rng.standard_normal((n, noise_dim, 1, 1))).ravel()
