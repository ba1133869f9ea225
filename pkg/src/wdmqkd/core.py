"""Shared domain types, unit conversions and entropy helpers.

Units are conventions, not types: times in ps or s as named, temperatures
in K (offsets from the nominal set point), bias in normalized volts and
phases in radians.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT_NM_THZ = 299_792.458

# ITU-T 100 GHz grid slots covering 1545.32 .. 1550.92 nm
GRID_FREQUENCIES_THZ = tuple(round(193.3 + 0.1 * k, 1) for k in range(8))
GRID_WAVELENGTHS_NM = tuple(
    sorted(SPEED_OF_LIGHT_NM_THZ / f for f in GRID_FREQUENCIES_THZ)
)
GRID_TOLERANCE_NM = 0.05
MAX_CHANNELS = 8


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class EmptyBlockError(ValueError):
    """A rate or fraction was requested over zero samples."""


def nearest_grid_wavelength(wavelength_nm: float) -> float | None:
    best = min(GRID_WAVELENGTHS_NM, key=lambda g: abs(g - wavelength_nm))
    return best if abs(best - wavelength_nm) <= GRID_TOLERANCE_NM else None


@dataclass(frozen=True)
class WavelengthChannel:
    index: int
    wavelength_nm: float

    def __post_init__(self):
        if not 0 <= self.index < MAX_CHANNELS:
            raise ValueError(f"channel index {self.index} outside 0..{MAX_CHANNELS - 1}")
        if nearest_grid_wavelength(self.wavelength_nm) is None:
            raise ValueError(
                f"{self.wavelength_nm} nm is not a 100 GHz grid slot between "
                f"{GRID_WAVELENGTHS_NM[0]:.2f} and {GRID_WAVELENGTHS_NM[-1]:.2f} nm"
            )


class Basis(enum.IntEnum):
    TIME = 0
    PHASE = 1


class ParamId(str, enum.Enum):
    DETECTION_TIMING = "detection_timing_offset"
    ENCODER_BIAS = "encoder_bias"
    AMZI_TEMPERATURE = "amzi_temperature"
    PHASE_COMP_AMPLITUDE = "phase_comp_amplitude"


# Quantization steps of the four tunable parameters.
DEFAULT_STEPS = {
    ParamId.DETECTION_TIMING: 12.5,  # ps
    ParamId.ENCODER_BIAS: 0.01,  # normalized volts
    ParamId.AMZI_TEMPERATURE: 0.01,  # K
    ParamId.PHASE_COMP_AMPLITUDE: 0.01,  # rad
}

_PARAM_ORDER = {p: i for i, p in enumerate(ParamId)}

DEFAULT_BOUNDS = {
    ParamId.DETECTION_TIMING: (-400.0, 400.0),
    ParamId.ENCODER_BIAS: (-1.0, 1.0),
    ParamId.AMZI_TEMPERATURE: (-1.0, 1.0),
    ParamId.PHASE_COMP_AMPLITUDE: (-2 * math.pi, 2 * math.pi),
}


def snap(value: float, step: float) -> float:
    """Round ``value`` to the nearest integer multiple of ``step``."""
    return round(value / step) * step


def on_grid(value: float, step: float, tol: float = 1e-9) -> bool:
    return abs(value / step - round(value / step)) <= tol


@dataclass(frozen=True, slots=True)
class SystemOperatingPoint:
    """The four controllable settings, as offsets from nominal alignment."""

    detection_timing_offset: float = 0.0
    encoder_bias: float = 0.0
    amzi_temperature: float = 0.0
    phase_comp_amplitude: float = 0.0

    def get(self, pid: ParamId) -> float:
        return getattr(self, pid.value)

    def with_value(self, pid: ParamId, value: float, step: float | None = None,
                   bounds: tuple[float, float] | None = None) -> "SystemOperatingPoint":
        """Return a copy with one parameter set, clamped then snapped to its grid."""
        step = DEFAULT_STEPS[pid] if step is None else step
        lo, hi = DEFAULT_BOUNDS[pid] if bounds is None else bounds
        value = min(max(value, lo), hi)
        value = snap(value, step)
        # snapping may push a non-grid bound outward
        if value > hi:
            value -= step
        elif value < lo:
            value += step
        values = [self.detection_timing_offset, self.encoder_bias, self.amzi_temperature,
                  self.phase_comp_amplitude]
        values[_PARAM_ORDER[pid]] = value
        return SystemOperatingPoint(*values)

    def quantized(self, steps: dict | None = None) -> "SystemOperatingPoint":
        steps = DEFAULT_STEPS if steps is None else steps
        return SystemOperatingPoint(**{p.value: snap(self.get(p), steps[p]) for p in ParamId})

    def is_quantized(self, steps: dict | None = None) -> bool:
        steps = DEFAULT_STEPS if steps is None else steps
        return all(on_grid(self.get(p), steps[p]) for p in ParamId)


@dataclass(frozen=True, slots=True)
class EpochStats:
    """Per-epoch, per-channel detection bookkeeping.

    ``qber`` is NaN when no bits were sifted.
    """

    epoch_index: int
    channel: WavelengthChannel
    gated_pulses: int
    signal_clicks: int
    dark_clicks: int
    sifted_bits: int
    sifted_errors: int
    qber: float
    sifted_rate_bps: float
    secure_rate_bps: float = 0.0

    def __post_init__(self):
        if min(self.gated_pulses, self.signal_clicks, self.dark_clicks,
               self.sifted_bits, self.sifted_errors) < 0:
            raise ValueError("negative count in EpochStats")
        if not self.sifted_errors <= self.sifted_bits <= self.signal_clicks + self.dark_clicks:
            raise ValueError("EpochStats violates errors <= sifted <= clicks")


def binary_entropy(p: float) -> float:
    """Shannon entropy of a Bernoulli(p) variable, in bits."""
    if not 0.0 <= p <= 1.0 or math.isnan(p):
        raise DomainError(f"binary_entropy undefined for p={p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def binary_entropy_array(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1) | np.isnan(p)):
        raise DomainError("binary_entropy undefined outside [0, 1]")
    inner = (p > 0) & (p < 1)
    q = np.where(inner, p, 0.5)
    return np.where(inner, -q * np.log2(q) - (1 - q) * np.log2(1 - q), 0.0)


def db_to_transmittance(loss_db: float) -> float:
    if loss_db < 0 or math.isnan(loss_db):
        raise DomainError(f"loss must be >= 0 dB, got {loss_db}")
    return 10.0 ** (-loss_db / 10.0)


def qber_from_counts(errors: int, sifted: int) -> float:
    if sifted == 0:
        raise EmptyBlockError("QBER undefined for an empty sifted block")
    if not 0 <= errors <= sifted:
        raise DomainError(f"need 0 <= errors <= sifted, got {errors}/{sifted}")
    return errors / sifted
