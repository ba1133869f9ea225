"""Asymptotic secure-fraction formulas (secure bits per sifted bit)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..core import DomainError, binary_entropy


class RateKind(str, enum.Enum):
    IDEAL_BB84 = "ideal_bb84"
    GLLP_MULTIPHOTON = "gllp_multiphoton"
    CALIBRATED = "calibrated"


# kappa fitted so that the calibrated fraction at 1.61 % QBER equals 151.5 / 315.3
CALIBRATED_KAPPA = 0.6405


@dataclass(frozen=True)
class RateFormulaConfig:
    kind: RateKind = RateKind.CALIBRATED
    ec_inefficiency_f: float = 1.1
    kappa: float = CALIBRATED_KAPPA
    mu: float = 0.5
    detection_prob_per_pulse: float | None = None

    def __post_init__(self):
        if self.ec_inefficiency_f < 1:
            raise ValueError("ec_inefficiency_f must be >= 1")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.kind == RateKind.GLLP_MULTIPHOTON and not self.detection_prob_per_pulse:
            raise ValueError("GLLP formula needs detection_prob_per_pulse > 0")


def multiphoton_probability(mu: float) -> float:
    """P(n >= 2) for a Poissonian source of mean ``mu``."""
    return -math.expm1(-mu) - mu * math.exp(-mu)


def secure_fraction(config: RateFormulaConfig, qber: float) -> float:
    if not 0 <= qber < 0.5:
        raise DomainError(f"secure fraction needs 0 <= qber < 0.5, got {qber}")
    f = config.ec_inefficiency_f
    h = binary_entropy(qber)
    if config.kind == RateKind.IDEAL_BB84:
        return max(0.0, 1.0 - f * h - h)
    if config.kind == RateKind.CALIBRATED:
        return config.kappa * max(0.0, 1.0 - f * h - h)
    omega = max(0.0, 1.0 - multiphoton_probability(config.mu) / config.detection_prob_per_pulse)
    if omega == 0.0 or qber / omega >= 0.5:
        return 0.0
    return max(0.0, omega * (1.0 - binary_entropy(qber / omega)) - f * h)
