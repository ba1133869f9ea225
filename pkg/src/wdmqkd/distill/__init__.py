"""Classical post-processing: sifting, Cascade, Toeplitz amplification."""

from .cascade import ReconciledBlock, ReconciliationError, cascade_reconcile, run_cascade
from .pipeline import (DistillAccounting, DistillConfig, distill_block, expected_yield,
                       expected_yield_array)
from .privacy import SecureKeyBlock, SeedLengthError, toeplitz_amplify, toeplitz_hash
from .rates import CALIBRATED_KAPPA, RateFormulaConfig, RateKind, secure_fraction
from .sifting import BlockTooSmallError, SiftedBlock, estimate_qber, sift
