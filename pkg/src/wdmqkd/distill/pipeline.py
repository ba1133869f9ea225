"""Estimate -> reconcile -> amplify, with per-block accounting."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..core import binary_entropy, binary_entropy_array
from .cascade import MAX_QBER, ReconciliationError, cascade_reconcile
from .privacy import SecureKeyBlock, toeplitz_amplify
from .rates import RateFormulaConfig, RateKind, secure_fraction
from .sifting import SiftedBlock, estimate_qber


@dataclass(frozen=True)
class DistillConfig:
    sample_fraction: float = 0.05
    min_sample_bits: int = 100
    block_size: int = 100_000
    cascade_passes: int = 4
    # subtract measured Cascade leakage from the output length
    subtract_leakage: bool = True
    # Calibrated formula: kappa already covers sampling and EC leakage
    kappa_includes_leakage: bool = True


@dataclass(frozen=True)
class DistillAccounting:
    sifted_bits: int
    disclosed_sample_bits: int
    reconciled_bits: int
    true_errors: int
    estimated_qber: float
    leaked_bits: int
    secure_fraction: float
    secure_bits: int
    status: str = "ok"

    def to_dict(self) -> dict:
        return asdict(self)


def _empty_key() -> SecureKeyBlock:
    return SecureKeyBlock(np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.uint8))


def output_length(n_sifted: int, n_reconciled: int, fraction: float, leaked: int,
                  rate_config: RateFormulaConfig, config: DistillConfig) -> int:
    if rate_config.kind == RateKind.CALIBRATED and config.kappa_includes_leakage:
        m = math.floor(n_sifted * fraction)
    else:
        adjust = leaked if config.subtract_leakage else 0
        m = math.floor(n_reconciled * fraction - adjust)
    return max(0, min(m, n_reconciled))


def distill_block(sifted: SiftedBlock, rate_config: RateFormulaConfig,
                  config: DistillConfig, rng: np.random.Generator
                  ) -> tuple[SecureKeyBlock, DistillAccounting]:
    """Run the whole pipeline on one block.

    A non-positive secure fraction yields a zero-length key without running
    reconciliation. Stage errors (too-small block, failed reconciliation)
    propagate to the caller.
    """
    if sifted.is_empty:
        raise ValueError("distill_block needs a non-empty sifted block")
    n = len(sifted)
    true_errors = sifted.mismatches()
    est, remaining, disclosed = estimate_qber(sifted, config.sample_fraction, rng,
                                              config.min_sample_bits)
    fraction = secure_fraction(rate_config, est) if est < 0.5 else 0.0

    def zero(status):
        return _empty_key(), DistillAccounting(n, disclosed, 0, true_errors, est, 0,
                                               fraction, 0, status)

    if fraction <= 0:
        return zero("zero_fraction")
    if est > MAX_QBER:
        return zero("qber_too_high")
    # an error-free sample still needs a positive Cascade block-size estimate
    cascade_qber = est if est > 0 else 1.0 / disclosed
    reconciled = cascade_reconcile(remaining, min(cascade_qber, MAX_QBER), rng,
                                   passes=config.cascade_passes,
                                   disclosed_sample_bits=disclosed)
    m = output_length(n, len(remaining), fraction, reconciled.leaked_bits,
                      rate_config, config)
    if m == 0:
        return zero("zero_length")
    seed = rng.integers(0, 2, len(remaining) + m - 1, dtype=np.uint8)
    key = toeplitz_amplify(reconciled, m, seed)
    return key, DistillAccounting(n, disclosed, len(remaining), true_errors, est,
                                  reconciled.leaked_bits, fraction, m)


def expected_yield(rate_config: RateFormulaConfig, config: DistillConfig, qber: float) -> float:
    """Secure bits per sifted bit predicted without running the pipeline.

    Cascade leakage is approximated by ``f * h(qber)``.
    """
    if math.isnan(qber) or qber >= 0.5:
        return 0.0
    fraction = secure_fraction(rate_config, qber)
    if fraction <= 0:
        return 0.0
    if rate_config.kind == RateKind.CALIBRATED and config.kappa_includes_leakage:
        return fraction
    keep = 1.0 - config.sample_fraction
    leak = rate_config.ec_inefficiency_f * binary_entropy(qber) if config.subtract_leakage else 0.0
    return max(0.0, keep * (fraction - leak))


def expected_yield_array(rate_config: RateFormulaConfig, config: DistillConfig,
                         qber) -> np.ndarray:
    """Vectorized :func:`expected_yield`; NaN and out-of-range QBERs give 0."""
    q = np.asarray(qber, dtype=float)
    valid = (q >= 0) & (q < 0.5)
    h = binary_entropy_array(np.where(valid, q, 0.0))
    f = rate_config.ec_inefficiency_f
    if rate_config.kind == RateKind.GLLP_MULTIPHOTON:
        fraction = np.array([secure_fraction(rate_config, x) if ok else 0.0
                             for x, ok in zip(q.tolist(), valid.tolist())])
    else:
        fraction = np.maximum(0.0, 1.0 - f * h - h)
        if rate_config.kind == RateKind.CALIBRATED:
            fraction = rate_config.kappa * fraction
    if not (rate_config.kind == RateKind.CALIBRATED and config.kappa_includes_leakage):
        leak = f * h if config.subtract_leakage else 0.0
        fraction = np.where(fraction > 0,
                            np.maximum(0.0, (1.0 - config.sample_fraction) * (fraction - leak)),
                            0.0)
    return np.where(valid, fraction, 0.0)


__all__ = ["DistillAccounting", "DistillConfig", "ReconciliationError", "distill_block",
           "expected_yield", "expected_yield_array", "output_length"]
