"""Orthonormal 8x8 type-II DCT and the zigzag scan."""

import numpy as np

BLOCK = 8


def dct_matrix(n: int = BLOCK) -> np.ndarray:
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    m = np.cos(np.pi * (2 * i + 1) * k / (2 * n)) * np.sqrt(2.0 / n)
    m[0] /= np.sqrt(2.0)
    return m


_C = dct_matrix()


def forward_dct(blocks: np.ndarray) -> np.ndarray:
    """2-D DCT over the last two axes of an (..., 8, 8) array."""
    return _C @ np.asarray(blocks, np.float64) @ _C.T


def inverse_dct(coeffs: np.ndarray) -> np.ndarray:
    return _C.T @ np.asarray(coeffs, np.float64) @ _C


def zigzag_order(n: int = BLOCK) -> np.ndarray:
    """Flat indices of an n x n block in JPEG zigzag order."""
    idx = sorted(((i, j) for i in range(n) for j in range(n)),
                 key=lambda p: (p[0] + p[1], p[0] if (p[0] + p[1]) % 2 else p[1]))
    return np.array([i * n + j for i, j in idx])


ZIGZAG = zigzag_order()
