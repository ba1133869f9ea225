"""Cascade error reconciliation (original four-pass variant).

Pass ``j`` splits a permutation of the key into blocks of ``k1 * 2**j``
bits (pass 0 uses the identity order). Alice discloses every block parity;
a mismatched block is bisected, one disclosed parity per halving, until the
erroneous bit is isolated. Each correction flips the parity of the blocks
holding that bit in every pass already run, and any block thereby made odd
is corrected in turn, smallest blocks first.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .sifting import SiftedBlock

FIRST_BLOCK_CONSTANT = 0.73
MAX_QBER = 0.11


class ReconciliationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReconciledBlock:
    bits: np.ndarray
    leaked_bits: int
    disclosed_sample_bits: int
    estimated_qber: float
    corrected_errors: int = 0


def first_block_size(qber: float) -> int:
    return math.ceil(FIRST_BLOCK_CONSTANT / qber)


def block_sizes(n: int, k1: int, passes: int = 4) -> list[int]:
    return [min(n, k1 * 2 ** j) for j in range(passes)]


def digest(bits: np.ndarray) -> bytes:
    return hashlib.blake2b(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes(),
                           digest_size=32).digest()


class _Pass:
    """One pass: its permutation, block size and the permuted difference
    pattern ``alice ^ bob`` that Bob's corrections keep up to date."""

    __slots__ = ("perm", "inv", "k", "diff", "odd")

    def __init__(self, perm, k, alice, bob):
        n = len(perm)
        self.perm = perm
        self.inv = np.empty(n, dtype=np.int64)
        self.inv[perm] = np.arange(n)
        self.k = k
        self.diff = (alice[perm] ^ bob[perm]).astype(bool)
        starts = np.arange(0, n, k)
        # parity mismatch of each block = parity of its difference count
        self.odd = (np.add.reduceat(self.diff.astype(np.int64), starts) & 1).astype(bool)


def run_cascade(alice: np.ndarray, bob: np.ndarray, perms: list[np.ndarray],
                sizes: list[int]) -> tuple[np.ndarray, int, int]:
    """Reconcile ``bob`` toward ``alice`` with the given pass permutations.

    Returns ``(corrected_bob, leaked_bits, corrections)``. Only parity
    comparisons are read from the difference pattern, i.e. exactly what the
    two parties learn by exchanging parities; every such exchange is
    counted as one leaked bit.
    """
    alice = np.asarray(alice, dtype=np.uint8)
    bob = np.asarray(bob, dtype=np.uint8).copy()
    n = len(alice)
    done: list[_Pass] = []
    leaked = 0
    corrections = 0
    count = np.count_nonzero

    def bisect(ps: _Pass, blk: int) -> int:
        nonlocal leaked
        lo, hi = blk * ps.k, min((blk + 1) * ps.k, n)
        diff = ps.diff
        while hi - lo > 1:
            mid = (lo + hi) // 2
            leaked += 1
            if count(diff[lo:mid]) & 1:
                hi = mid
            else:
                lo = mid
        return int(ps.perm[lo])

    def flip(pos: int) -> list[tuple[int, int]]:
        bob[pos] ^= 1
        touched = []
        for i, ps in enumerate(done):
            q = ps.inv[pos]
            ps.diff[q] = not ps.diff[q]
            blk = int(q // ps.k)
            ps.odd[blk] = not ps.odd[blk]
            touched.append((i, blk))
        return touched

    for perm, k in zip(perms, sizes):
        ps = _Pass(perm, k, alice, bob)
        done.append(ps)
        leaked += len(ps.odd)
        for blk in np.flatnonzero(ps.odd).tolist():
            if not ps.odd[blk]:
                continue  # fixed by an earlier cascade
            pending = set(flip(bisect(ps, blk)))
            corrections += 1
            while pending:
                i, c = min(pending)
                pending.discard((i, c))
                if done[i].odd[c]:
                    pending.update(flip(bisect(done[i], c)))
                    corrections += 1
    return bob, leaked, corrections


def cascade_reconcile(block: SiftedBlock, estimated_qber: float, rng: np.random.Generator,
                      *, passes: int = 4, first_block: int | None = None,
                      disclosed_sample_bits: int = 0) -> ReconciledBlock:
    """Reconcile a sifted block and verify equality with a full-block hash."""
    n = len(block)
    if n == 0:
        raise ValueError("cannot reconcile an empty block")
    if not 0 < estimated_qber <= MAX_QBER:
        raise ValueError(f"Cascade needs 0 < qber <= {MAX_QBER}, got {estimated_qber}")
    k1 = first_block if first_block is not None else first_block_size(estimated_qber)
    sizes = block_sizes(n, k1, passes)
    perms = [np.arange(n)] + [rng.permutation(n) for _ in range(passes - 1)]
    bob, leaked, corrections = run_cascade(block.bits_alice, block.bits_bob, perms, sizes)
    if digest(bob) != digest(block.bits_alice):
        residual = int(np.count_nonzero(bob != block.bits_alice))
        raise ReconciliationError(f"{residual} errors remain after {passes} Cascade passes")
    return ReconciledBlock(bob, leaked, disclosed_sample_bits, estimated_qber, corrections)
