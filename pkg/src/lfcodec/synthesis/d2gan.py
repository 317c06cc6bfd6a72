"""Dual-discriminator adversarial training of the view generator.

D1 is pushed up by ``alpha * log D1(x) - D1(G)`` and D2 by
``beta * log D2(G) - D2(x)``; the generator descends
``beta * log D2(G) - D1(G)``, optionally added to an MSE content loss with
weight ``gamma`` on the adversarial part.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DomainError, TrainingDiverged
from ..lightfield import LightField, patch_origins
from ..nn.layers import mse, param_pairs
from ..nn.optim import AdamState, cosine_lr, step_pairs
from ..structure import PseudoVideoSequence, build_sequence
from .networks import (IN_PATCH, OUT_PATCH, D2GanConfig, DiscriminatorPair, GeneratorPair,
                       SynthBatch, prepare_view, quadrant_geometry)

log = logging.getLogger(__name__)

LOG_FIELDS = ("step", "L_D1", "L_D2", "L_G_adv", "L_mse", "val_psnr")


def _check_scores(*scores):
    for s in scores:
        s = np.asarray(s, np.float64)
        if np.any(~(s > 0)):
            raise DomainError("discriminator scores must be strictly positive")


def d2gan_objective(real_d1, fake_d1, real_d2, fake_d2, alpha: float, beta: float) -> float:
    """Value of the three-player minimax objective for one batch."""
    _check_scores(real_d1, fake_d1, real_d2, fake_d2)
    return float(alpha * np.mean(np.log(real_d1)) - np.mean(fake_d1)
                 - np.mean(real_d2) + beta * np.mean(np.log(fake_d2)))


def d2gan_losses(real_d1, fake_d1, real_d2, fake_d2, alpha: float,
                 beta: float) -> Tuple[float, float, float]:
    """(L_D1, L_D2, L_G_adv) batch means.

    L_D1 and L_D2 are maximised by their discriminators; L_G_adv is
    minimised by the generator.
    """
    _check_scores(real_d1, fake_d1, real_d2, fake_d2)
    l_d1 = np.mean(alpha * np.log(real_d1) - fake_d1)
    l_d2 = np.mean(beta * np.log(fake_d2) - real_d2)
    l_g = np.mean(beta * np.log(fake_d2) - fake_d1)
    return float(l_d1), float(l_d2), float(l_g)


class D2GanTrainer:
    """Alternating updates: one ascent step per discriminator, then one
    descent step on the generator.

    ``generator`` needs ``forward(inputs, train)``, ``backward(grad)`` and
    ``parameters()``; the discriminators are :class:`Sequential` nets whose
    outputs are strictly positive.
    """

    def __init__(self, generator, discriminators: DiscriminatorPair, config: D2GanConfig,
                 content_loss: bool = True):
        self.g = generator
        self.d = discriminators
        self.config = config
        self.content_loss = content_loss
        self.opt_g = AdamState(lr=config.lr)
        self.opt_d1 = AdamState(lr=config.lr)
        self.opt_d2 = AdamState(lr=config.lr)
        self.steps = 0

    @property
    def adversarial(self) -> bool:
        return not self.content_loss or self.config.gamma > 0

    def step(self, inputs, real: np.ndarray, target: Optional[np.ndarray] = None) -> Dict[str, float]:
        cfg = self.config
        d1, d2 = self.d.d1, self.d.d2
        fake = self.g.forward(inputs, train=True)
        m = fake.shape[0]
        rec = {"L_D1": float("nan"), "L_D2": float("nan"), "L_G_adv": float("nan"),
               "L_mse": float("nan")}
        if self.adversarial:
            both = np.concatenate([real, fake])
            n_real = real.shape[0]
            s1 = d1.forward(both, train=True)
            r1, f1 = s1[:n_real], s1[n_real:]
            g1 = np.concatenate([cfg.alpha / (n_real * r1), np.full_like(f1, -1.0 / m)])
            d1.backward(g1)
            s2 = d2.forward(both, train=True)
            r2, f2 = s2[:n_real], s2[n_real:]
            g2 = np.concatenate([np.full_like(r2, -1.0 / n_real), cfg.beta / (m * f2)])
            d2.backward(g2)
            rec["L_D1"], rec["L_D2"], _ = d2gan_losses(r1, f1, r2, f2, cfg.alpha, cfg.beta)
            step_pairs(param_pairs(d1), self.opt_d1, maximize=True)
            step_pairs(param_pairs(d2), self.opt_d2, maximize=True)

            f1 = d1.forward(fake, train=True)
            f2 = d2.forward(fake, train=True)
            _check_scores(f1, f2)
            rec["L_G_adv"] = float(np.mean(cfg.beta * np.log(f2) - f1))
            gf = d1.backward(np.full_like(f1, -1.0 / m)) + d2.backward(cfg.beta / (m * f2))
            weight = cfg.gamma if self.content_loss else 1.0
            grad = weight * gf
        else:
            grad = np.zeros_like(fake)
        if self.content_loss:
            if target is None:
                raise ValueError("content loss needs a target")
            rec["L_mse"], gm = mse(fake, target)
            grad = grad + gm
        if not all(np.isfinite(v) for v in rec.values() if v == v):
            raise TrainingDiverged(f"non-finite loss at step {self.steps}: {rec}")
        self.g.backward(grad)
        step_pairs(self.g.parameters(), self.opt_g)
        self.steps += 1
        return rec


# --- patch datasets ----------------------------------------------------------

@dataclass
class _Target:
    refs_p: np.ndarray
    feats: np.ndarray
    offsets: np.ndarray
    qpos: np.ndarray
    truth: np.ndarray
    origins: List[Tuple[int, int]]


@dataclass
class SynthDataset:
    """Training targets (non-reference views) with their reference stacks."""

    targets: List[_Target] = field(default_factory=list)

    @property
    def n_patches(self) -> int:
        return sum(len(t.origins) for t in self.targets)

    def batch(self, items: Sequence[Tuple[int, int]]) -> SynthBatch:
        ts = [self.targets[i] for i, _ in items]
        origins = [t.origins[j] for t, (_, j) in zip(ts, items)]
        return SynthBatch(
            feats=np.stack([t.feats[:, r:r + IN_PATCH, c:c + IN_PATCH]
                            for t, (r, c) in zip(ts, origins)]),
            refs=np.stack([t.refs_p for t in ts]),
            origins=np.array(origins),
            offsets=np.stack([t.offsets for t in ts]),
            qpos=np.stack([t.qpos for t in ts]),
            target=np.stack([t.truth[r:r + OUT_PATCH, c:c + OUT_PATCH]
                             for t, (r, c) in zip(ts, origins)])[:, None],
        )

    def index(self) -> List[Tuple[int, int]]:
        return [(i, j) for i, t in enumerate(self.targets) for j in range(len(t.origins))]

    def sample(self, n: int, rng: np.random.Generator) -> SynthBatch:
        idx = self.index()
        pick = rng.choice(len(idx), size=min(n, len(idx)), replace=False)
        return self.batch([idx[k] for k in pick])


def build_synth_dataset(lightfields: Sequence[LightField], config: D2GanConfig = D2GanConfig(),
                        stride: int = 16, seq: Optional[PseudoVideoSequence] = None,
                        decoded: Optional[Sequence[LightField]] = None) -> SynthDataset:
    """Patch dataset over every non-reference view of each light field.

    References come from ``decoded`` when given (decoder-side conditions),
    otherwise from the originals. Ground truth is always the original view.
    """
    ds = SynthDataset()
    for k, lf in enumerate(lightfields):
        s = seq or build_sequence(lf.grid_rows, lf.grid_cols)[0]
        src = decoded[k] if decoded is not None else lf
        h, w = lf.view_shape
        origins = [(r, c) for r in patch_origins(h, OUT_PATCH, stride)
                   for c in patch_origins(w, OUT_PATCH, stride)]
        for e in s:
            if e.is_reference:
                continue
            corners = s.quadrant_corners(e.pos)
            refs = [src[p].luma_float() for p in corners]
            refs_p, feats = prepare_view(refs, corners, e.pos, config.n_levels, config.d_max)
            offsets, qpos = quadrant_geometry(e.pos, corners)
            ds.targets.append(_Target(refs_p, feats, offsets, qpos, lf[e.pos].luma_float(), origins))
    return ds


def validation_psnr(gen: GeneratorPair, ds: SynthDataset, max_patches: int = 64,
                    chunk: int = 16) -> float:
    idx = ds.index()
    if len(idx) > max_patches:
        step = len(idx) / max_patches
        idx = [idx[int(i * step)] for i in range(max_patches)]
    err, n = 0.0, 0
    for s in range(0, len(idx), chunk):
        b = ds.batch(idx[s:s + chunk])
        pred = np.clip(gen.forward(b), 0, 1)
        err += float(((pred - b.target) ** 2).sum())
        n += pred.size
    m = err / n
    return float("inf") if m == 0 else 10 * np.log10(1.0 / m)


def train_d2gan(dataset: SynthDataset, config: D2GanConfig = D2GanConfig(), seed: int = 0,
                steps: int = 1000, val_dataset: Optional[SynthDataset] = None,
                generator: Optional[GeneratorPair] = None,
                discriminators: Optional[DiscriminatorPair] = None,
                log_path=None, progress: Optional[Callable[[Dict], None]] = None,
                ) -> Tuple[GeneratorPair, DiscriminatorPair, List[Dict[str, float]]]:
    """Train the generator pair against two discriminators.

    With ``config.warmup_steps`` the disparity net is first fitted alone so
    that the plain average of the warped references matches the target; with
    ``config.freeze_disparity`` it then stays fixed while g_c trains.
    Returns the models and one log row per adversarial step (``val_psnr``
    filled every ``config.val_every`` steps and at the last step).
    """
    rng = np.random.default_rng(seed)
    gen = generator or GeneratorPair(config.n_levels, seed=seed)
    disc = discriminators or DiscriminatorPair(seed=seed + 1)
    trainer = D2GanTrainer(gen, disc, config)
    rows: List[Dict[str, float]] = []
    warm = AdamState(lr=config.lr)
    for step in range(config.warmup_steps):
        b = dataset.sample(config.batch_size, rng)
        loss, g = mse(gen.blend(b, train=True), b.target)
        gen.blend_backward(g)
        step_pairs(param_pairs(gen.g_d), warm)
        if progress:
            progress({"step": step - config.warmup_steps, "L_mse": loss, "val_psnr": float("nan")})
    gen.train_disparity = not config.freeze_disparity
    try:
        _adversarial_steps(gen, trainer, dataset, config, rng, steps, val_dataset, rows, progress)
    finally:
        gen.train_disparity = True
    if log_path:
        write_log(log_path, rows)
    return gen, disc, rows


def _adversarial_steps(gen, trainer, dataset, config, rng, steps, val_dataset, rows, progress):
    for step in range(steps):
        if config.lr_min is not None:
            lr = cosine_lr(config.lr, config.lr_min, step, steps)
            for opt in (trainer.opt_g, trainer.opt_d1, trainer.opt_d2):
                opt.lr = lr
        b = dataset.sample(config.batch_size, rng)
        rec = trainer.step(b, b.target, b.target)
        rec["step"] = step
        rec["val_psnr"] = float("nan")
        if val_dataset is not None and ((step + 1) % config.val_every == 0 or step == steps - 1):
            rec["val_psnr"] = validation_psnr(gen, val_dataset)
            log.info("step %d mse %.5f val %.2f dB", step, rec["L_mse"], rec["val_psnr"])
        rows.append(rec)
        if progress:
            progress(rec)


def write_log(path, rows: Sequence[Dict[str, float]], fields=LOG_FIELDS):
    with Path(path).open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fields), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
