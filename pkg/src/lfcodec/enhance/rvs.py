"""Reference view selection: pick the best-looking decoded reference view as
the auxiliary enhancement input."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import ndimage

from ..lightfield import AngularPos, View

Scorer = Callable[[np.ndarray], float]


def laplacian_variance(y: np.ndarray) -> float:
    return float(ndimage.laplace(np.asarray(y, np.float64)).var())


def blockiness(y: np.ndarray, block: int = 8) -> float:
    """Mean |gradient| across block boundaries minus the mean elsewhere."""
    y = np.asarray(y, np.float64)
    gx = np.abs(np.diff(y, axis=1))
    gy = np.abs(np.diff(y, axis=0))
    bx = (np.arange(gx.shape[1]) % block) == block - 1
    by = (np.arange(gy.shape[0]) % block) == block - 1
    edge = np.concatenate([gx[:, bx].ravel(), gy[by].ravel()])
    inner = np.concatenate([gx[:, ~bx].ravel(), gy[~by].ravel()])
    if edge.size == 0 or inner.size == 0:
        return 0.0
    return float(edge.mean() - inner.mean())


def sharpness_score(y: np.ndarray) -> float:
    """Higher is better: Laplacian variance damped by visible block edges."""
    return laplacian_variance(y) / (1.0 + max(blockiness(y), 0.0))


def constant_score(y: np.ndarray) -> float:
    """Scores every candidate equally so the tie-break rule decides."""
    return 0.0


@dataclass(frozen=True)
class RvsPolicy:
    name: str
    scorer: Scorer

    def score(self, view) -> float:
        y = view.y if isinstance(view, View) else view
        return float(self.scorer(np.asarray(y, np.float64)))


DEFAULT_POLICY = RvsPolicy("sharpness", sharpness_score)
FALLBACK_POLICY = RvsPolicy("nearest", constant_score)
POLICIES = {p.name: p for p in (DEFAULT_POLICY, FALLBACK_POLICY)}


def chebyshev(a, b) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def select_reference(target: AngularPos, candidates: Mapping[AngularPos, object],
                     policy: Optional[RvsPolicy] = None,
                     tl: Optional[Mapping[AngularPos, int]] = None,
                     scores: Optional[Mapping[AngularPos, float]] = None) -> AngularPos:
    """Highest-scoring candidate.

    Ties break by smaller Chebyshev distance to ``target``, then by lower
    temporal layer when ``tl`` is given, then row-major order. ``scores``
    may carry precomputed policy scores per position.
    """
    if not candidates:
        raise ValueError("no candidate reference views")
    policy = policy or DEFAULT_POLICY
    tl = tl or {}
    if scores is None:
        scores = {AngularPos(*p): policy.score(v) for p, v in candidates.items()}

    def key(pos):
        pos = AngularPos(*pos)
        return (-scores[pos], chebyshev(pos, target), tl.get(pos, 0), pos.u, pos.v)

    return AngularPos(*min(candidates, key=key))
