"""Patch datasets, training and light-field level application of the
enhancement network."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DimensionMismatch, TrainingDiverged
from ..lightfield import AngularPos, LightField, View, patch_origins
from ..metrics import psnr
from ..nn.layers import mse
from ..nn.optim import AdamState, cosine_lr, step_pairs
from ..structure import PseudoVideoSequence, central_view, reference_layout
from .qenet import QeNet, enhance_luma
from .rvs import DEFAULT_POLICY, RvsPolicy, select_reference

log = logging.getLogger(__name__)

QE_LOG_FIELDS = ("step", "train_loss", "val_loss")
QUALITY_FIELDS = ("poc", "u", "v", "psnr_before", "psnr_after")


@dataclass(frozen=True)
class QeConfig:
    lr: float = 2e-4
    batch_size: int = 128
    patch: int = 64
    stride: int = 32
    steps: int = 1000
    val_every: int = 50
    lr_min: Optional[float] = None  # cosine decay from lr when set


def enhance_view(target, central, picked, model: QeNet) -> View:
    """Enhance the luma of ``target``; chroma passes through untouched."""
    planes = [v.luma_float() if isinstance(v, View) else np.asarray(v, np.float64)
              for v in (target, central, picked)]
    if len({p.shape for p in planes}) != 1:
        raise DimensionMismatch("target, central and picked views differ in size")
    y = enhance_luma(model, *planes)
    if isinstance(target, View):
        return target.with_luma(y)
    return View.from_luma(y)


def _roles(lf: LightField, seq: Optional[PseudoVideoSequence]):
    refs = reference_layout(lf.grid_rows, lf.grid_cols)
    tl = {e.pos: e.tl for e in seq} if seq is not None else {p: 0 for p in refs}
    return refs, tl


def reference_candidates(lf: LightField, seq: Optional[PseudoVideoSequence] = None
                         ) -> Dict[AngularPos, View]:
    """The non-central reference views of ``lf``."""
    c = central_view(lf.grid_rows, lf.grid_cols)
    refs, _ = _roles(lf, seq)
    return {p: lf[p] for p in sorted(refs) if p != c}


def pick_references(lf: LightField, seq: Optional[PseudoVideoSequence] = None,
                    policy: RvsPolicy = DEFAULT_POLICY) -> Dict[AngularPos, AngularPos]:
    """Auxiliary view chosen for every non-reference view."""
    refs, tl = _roles(lf, seq)
    cands = reference_candidates(lf, seq)
    scores = {p: policy.score(v) for p, v in cands.items()}
    return {p: select_reference(p, cands, policy, tl, scores)
            for p in lf.positions() if p not in refs}


def enhance_decoded_lf(lf: LightField, seq: Optional[PseudoVideoSequence], model: QeNet,
                       policy: RvsPolicy = DEFAULT_POLICY,
                       original: Optional[LightField] = None,
                       report: Optional[List[Dict]] = None) -> LightField:
    """Enhance every non-reference view; reference views are returned as is.

    If ``original`` and a ``report`` list are given, one row per enhanced view
    (poc, u, v, psnr_before, psnr_after) is appended; POCs follow ``seq`` or
    row-major order without one.
    """
    c = central_view(lf.grid_rows, lf.grid_cols)
    picks = pick_references(lf, seq, policy)
    order = [e.pos for e in seq] if seq is not None else list(lf.positions())
    out = {}
    for poc, pos in enumerate(order):
        if pos not in picks:
            continue
        v = lf[pos]
        out[pos] = enhance_view(v, lf[c], lf[picks[pos]], model)
        if original is not None and report is not None:
            report.append({"poc": poc, "u": pos.u, "v": pos.v,
                           "psnr_before": psnr(v, original[pos]),
                           "psnr_after": psnr(out[pos], original[pos])})
    return lf.replace(out)


def write_quality_report(path, rows: Sequence[Dict]):
    with Path(path).open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(QUALITY_FIELDS), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


# --- training ------------------------------------------------------------------

@dataclass
class QeDataset:
    """Input stacks (N, 3, H, W) and ground-truth targets (N, 1, H, W) as floats."""

    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return self.inputs.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        idx = rng.choice(len(self), size=min(n, len(self)), replace=False)
        return self.inputs[idx], self.targets[idx]


def build_qe_dataset(pairs: Sequence[Tuple[LightField, LightField]], seq: Optional[PseudoVideoSequence] = None,
                     patch: int = 64, stride: int = 32,
                     policy: RvsPolicy = DEFAULT_POLICY) -> QeDataset:
    """Patches of every non-reference view for (degraded, original) light-field pairs."""
    xs, ys = [], []
    for degraded, original in pairs:
        c = central_view(degraded.grid_rows, degraded.grid_cols)
        picks = pick_references(degraded, seq, policy)
        h, w = degraded.view_shape
        origins = [(r, q) for r in patch_origins(h, patch, stride)
                   for q in patch_origins(w, patch, stride)]
        for pos in sorted(picks):
            stack = np.stack([degraded[pos].luma_float(), degraded[c].luma_float(),
                              degraded[picks[pos]].luma_float()])
            truth = original[pos].luma_float()
            for r, q in origins:
                xs.append(stack[:, r:r + patch, q:q + patch])
                ys.append(truth[None, r:r + patch, q:q + patch])
    return QeDataset(np.stack(xs), np.stack(ys))


def qe_loss(model: QeNet, ds: QeDataset, chunk: int = 32) -> float:
    err, n = 0.0, 0
    for s in range(0, len(ds), chunk):
        pred = model.forward(ds.inputs[s:s + chunk])
        err += float(((pred - ds.targets[s:s + chunk]) ** 2).sum())
        n += pred.size
    return err / n


def train_qenet(dataset: QeDataset, config: QeConfig = QeConfig(), seed: int = 0,
                val_dataset: Optional[QeDataset] = None, model: Optional[QeNet] = None,
                log_path=None, progress: Optional[Callable[[Dict], None]] = None,
                ) -> Tuple[QeNet, List[Dict[str, float]]]:
    """Minimise the MSE between enhanced and original targets with Adam."""
    rng = np.random.default_rng(seed)
    model = model or QeNet(seed=seed)
    opt = AdamState(lr=config.lr)
    rows = []
    for step in range(config.steps):
        if config.lr_min is not None:
            opt.lr = cosine_lr(config.lr, config.lr_min, step, config.steps)
        x, y = dataset.sample(config.batch_size, rng)
        loss, g = mse(model.forward(x, train=True), y)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {step}")
        model.backward(g)
        step_pairs(model.parameters(), opt)
        rec = {"step": step, "train_loss": loss, "val_loss": float("nan")}
        if val_dataset is not None and ((step + 1) % config.val_every == 0
                                        or step == config.steps - 1):
            rec["val_loss"] = qe_loss(model, val_dataset)
            log.info("qe step %d train %.6f val %.6f", step, loss, rec["val_loss"])
        rows.append(rec)
        if progress:
            progress(rec)
    if log_path:
        with Path(log_path).open("w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(QE_LOG_FIELDS))
            w.writeheader()
            w.writerows(rows)
    return model, rows
