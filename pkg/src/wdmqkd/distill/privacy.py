"""Toeplitz-matrix privacy amplification over GF(2)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve


class SeedLengthError(ValueError):
    pass


@dataclass(frozen=True)
class SecureKeyBlock:
    bits: np.ndarray
    toeplitz_seed: np.ndarray

    def __len__(self) -> int:
        return len(self.bits)


def toeplitz_hash(x: np.ndarray, m: int, seed: np.ndarray) -> np.ndarray:
    """``y[i] = XOR_j seed[i - j + n - 1] & x[j]`` for ``i < m``.

    The sum is a slice of the integer convolution ``seed * x``; the FFT
    product is exact after rounding as long as ``n`` stays far below 2**40.
    """
    x = np.asarray(x, dtype=np.uint8)
    seed = np.asarray(seed, dtype=np.uint8)
    n = len(x)
    if not 0 < m <= n:
        raise ValueError(f"output length m={m} must satisfy 0 < m <= n={n}")
    if len(seed) != n + m - 1:
        raise SeedLengthError(f"Toeplitz seed must have n + m - 1 = {n + m - 1} bits, got {len(seed)}")
    if n <= 64:
        conv = np.convolve(seed.astype(np.int64), x.astype(np.int64))
    else:
        conv = np.rint(fftconvolve(seed.astype(np.float64), x.astype(np.float64)))
    return (conv[n - 1:n - 1 + m].astype(np.int64) & 1).astype(np.uint8)


def toeplitz_amplify(block, m: int, seed: np.ndarray) -> SecureKeyBlock:
    bits = getattr(block, "bits", block)
    return SecureKeyBlock(toeplitz_hash(bits, m, seed), np.asarray(seed, dtype=np.uint8))
