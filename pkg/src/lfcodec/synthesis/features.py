"""Plane-sweep feature volume: mean and spread of the references warped at a
ladder of constant disparities."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from .warp import warp_plane


def disparity_levels(n_levels: int, d_max: float) -> np.ndarray:
    if n_levels < 2:
        raise ValueError("need at least two disparity levels")
    return np.linspace(-d_max, d_max, n_levels)


def build_features(refs: Sequence[np.ndarray], positions, q, n_levels: int = 9,
                   d_max: float = 4.0, quadrant=None) -> np.ndarray:
    """(2L, H, W) volume: the mean across refs at every level, then the population std
    at every level.

    If ``quadrant`` (the set of corner positions of q's quadrant) is given,
    the references must be exactly those corners.
    """
    if quadrant is not None and sorted(map(tuple, positions)) != sorted(map(tuple, quadrant)):
        raise ValueError("references are not the corner views of the target's quadrant")
    refs = [np.asarray(r, np.float64) for r in refs]
    shape = refs[0].shape
    if any(r.shape != shape for r in refs):
        raise DimensionMismatch("reference views differ in size")
    levels = disparity_levels(n_levels, d_max)
    out = np.empty((2 * n_levels,) + shape)
    for li, d in enumerate(levels):
        disp = np.full(shape, d)
        warped = np.stack([warp_plane(r, (p[0] - q[0], p[1] - q[1]), disp)
                           for r, p in zip(refs, positions)])
        out[li] = warped.mean(axis=0)
        out[n_levels + li] = warped.std(axis=0)
    return out
