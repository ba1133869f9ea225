"""Basis sifting and sampled QBER estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import WavelengthChannel


class BlockTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class SiftedBlock:
    """Alice's and Bob's sifted bits. An empty block is legal and means
    nothing survived sifting; downstream stages refuse it."""

    bits_alice: np.ndarray
    bits_bob: np.ndarray
    channel: WavelengthChannel | None = None
    epoch_range: tuple[int, int] | None = None

    def __post_init__(self):
        if len(self.bits_alice) != len(self.bits_bob):
            raise ValueError("Alice and Bob sifted blocks differ in length")

    def __len__(self) -> int:
        return len(self.bits_alice)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def mismatches(self) -> int:
        return int(np.count_nonzero(self.bits_alice != self.bits_bob))


def sift(alice_bits, alice_bases, bob_bits, bob_bases, channel=None,
         epoch_range=None) -> SiftedBlock:
    alice_bits, alice_bases, bob_bits, bob_bases = (
        np.asarray(x, dtype=np.uint8) for x in (alice_bits, alice_bases, bob_bits, bob_bases))
    if not len(alice_bits) == len(alice_bases) == len(bob_bits) == len(bob_bases):
        raise ValueError("sift needs four equal-length streams")
    keep = alice_bases == bob_bases
    return SiftedBlock(alice_bits[keep], bob_bits[keep], channel, epoch_range)


def estimate_qber(block: SiftedBlock, sample_fraction: float, rng: np.random.Generator,
                  min_sample_bits: int = 100) -> tuple[float, SiftedBlock, int]:
    """Publicly compare a random sample and drop it from the key.

    Returns ``(estimated_qber, remaining_block, disclosed_count)``.
    """
    if not 0 < sample_fraction < 1:
        raise ValueError("sample_fraction must lie strictly between 0 and 1")
    n = len(block)
    k = int(round(sample_fraction * n))
    if k < min_sample_bits:
        raise BlockTooSmallError(
            f"sample of {k} bits from a {n}-bit block is below the {min_sample_bits}-bit floor")
    idx = rng.choice(n, size=k, replace=False)
    errors = int(np.count_nonzero(block.bits_alice[idx] != block.bits_bob[idx]))
    keep = np.ones(n, dtype=bool)
    keep[idx] = False
    remaining = SiftedBlock(block.bits_alice[keep], block.bits_bob[keep],
                            block.channel, block.epoch_range)
    return errors / k, remaining, k
