"""Per-gate detection probabilities and epoch simulation for one channel.

Two simulation modes share one probability model:

* ``pulse_mc`` draws every clock gate individually (short windows only);
* ``rate_level`` draws aggregate counts (Poisson thinnings for large
  epochs, the exact binomial chain otherwise) with the same means, and
  synthesizes bit streams only when asked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EmptyBlockError, EpochStats, SystemOperatingPoint, WavelengthChannel
from .environment import EnvironmentState

DEFAULT_TIMING_SIGMA_PS = 74.85  # 50 ps offset -> 80 % count rate
DEFAULT_PULSE_MC_CAP = 100_000_000
POISSON_MIN_GATES = 10_000_000
POISSON_MAX_P = 0.01

PULSE_MC = "pulse_mc"
RATE_LEVEL = "rate_level"
MODES = (PULSE_MC, RATE_LEVEL)


class ConfigError(ValueError):
    pass


class CapExceededError(ValueError):
    pass


@dataclass(frozen=True)
class SourceModel:
    clock_rate_hz: float = 1.24e9
    mean_photon_number: float = 0.5
    pulse_pair_delay_ps: float = 400.0
    mu_per_pair: bool = True  # False: mean_photon_number is per pulse

    def __post_init__(self):
        if min(self.clock_rate_hz, self.pulse_pair_delay_ps) <= 0:
            raise ConfigError("source clock rate and pulse delay must be positive")
        if not 0 <= self.mean_photon_number <= 1:
            raise ConfigError("mean_photon_number must lie in [0, 1]")

    @property
    def mu_per_signal(self) -> float:
        return self.mean_photon_number if self.mu_per_pair else 2 * self.mean_photon_number


@dataclass(frozen=True)
class InterferometerModel:
    extinction_ratio_db: float = 20.0
    temp_to_phase_rad_per_K: float = 2 * math.pi / 0.25
    polarization_independent: bool = True
    pol_sensitivity: float = 0.5
    bias_error_coeff: float = 0.05

    def __post_init__(self):
        if not self.extinction_ratio_db > 0:
            raise ConfigError("extinction_ratio_db must be > 0")


@dataclass(frozen=True)
class DetectorModel:
    quantum_efficiency: float = 0.125
    dark_count_rate_hz: float = 1.5e3
    timing_sigma_ps: float = DEFAULT_TIMING_SIGMA_PS
    dead_time_s: float = 0.0
    n_detectors: int = 2

    def __post_init__(self):
        if not 0 <= self.quantum_efficiency <= 1:
            raise ConfigError("quantum_efficiency must lie in [0, 1]")
        if self.dark_count_rate_hz < 0 or self.dead_time_s < 0:
            raise ConfigError("detector rates must be >= 0")
        if not self.timing_sigma_ps > 0:
            raise ConfigError("timing_sigma_ps must be > 0")


@dataclass(frozen=True, slots=True)
class OutcomeProbabilities:
    p_signal_click: float
    p_dark_click: float
    conditional_error: float
    p_sift_keep: float = 0.5
    clock_rate_hz: float = 1.24e9


def timing_factor(offset_ps: float, timing_sigma_ps: float) -> float:
    """Fraction of the count rate left at a detection-timing misalignment."""
    if not timing_sigma_ps > 0:
        raise ValueError("timing_sigma_ps must be > 0")
    return math.exp(-offset_ps * offset_ps / (2.0 * timing_sigma_ps * timing_sigma_ps))


def visibility(extinction_ratio_db: float) -> float:
    if math.isinf(extinction_ratio_db):
        return 1.0
    er = 10.0 ** (extinction_ratio_db / 10.0)
    return (er - 1.0) / (er + 1.0)


def interference_error(extinction_ratio_db: float, phase_mismatch_rad: float) -> float:
    """Phase-basis error probability of an interferometer with finite contrast."""
    if not extinction_ratio_db > 0:
        raise ValueError("extinction_ratio_db must be > 0")
    return 0.5 * (1.0 - visibility(extinction_ratio_db) * math.cos(phase_mismatch_rad))


def bias_error(bias: float, coeff: float) -> float:
    return coeff * bias * bias


def phase_mismatch(interferometer: InterferometerModel, op_point: SystemOperatingPoint,
                   env: EnvironmentState, channel_phase_offset: float = 0.0) -> float:
    return (interferometer.temp_to_phase_rad_per_K
            * (op_point.amzi_temperature + env.amzi_temp_error_K)
            + channel_phase_offset - op_point.phase_comp_amplitude)


def outcome_probabilities(source: SourceModel, interferometer: InterferometerModel,
                          detector: DetectorModel, fiber_transmittance: float,
                          op_point: SystemOperatingPoint, env: EnvironmentState,
                          t_rx: float = 1.0, channel_phase_offset: float = 0.0
                          ) -> OutcomeProbabilities:
    if not 0 < t_rx <= 1:
        raise ConfigError(f"receiver excess loss t_rx must lie in (0, 1], got {t_rx}")
    offset = op_point.detection_timing_offset + env.fiber_delay_ps
    mean_detected = (source.mu_per_signal * fiber_transmittance * t_rx
                     * detector.quantum_efficiency
                     * timing_factor(offset, detector.timing_sigma_ps))
    p_signal = -math.expm1(-mean_detected)
    p_dark = detector.n_detectors * detector.dark_count_rate_hz / source.clock_rate_hz
    if detector.dead_time_s > 0:
        # linear dead-time correction R / (1 + R tau), applied per gate
        scale = source.clock_rate_hz * detector.dead_time_s
        p_signal /= 1.0 + p_signal * scale
        p_dark /= 1.0 + p_dark * scale

    e = interference_error(interferometer.extinction_ratio_db,
                           phase_mismatch(interferometer, op_point, env, channel_phase_offset))
    e += bias_error(op_point.encoder_bias + env.bias_drift, interferometer.bias_error_coeff)
    if not interferometer.polarization_independent:
        e += interferometer.pol_sensitivity * math.sin(env.polarization_angle_rad) ** 2
    e = min(max(e, 0.0), 0.5)
    return OutcomeProbabilities(p_signal, p_dark, e, 0.5, source.clock_rate_hz)


class ChannelOptics:
    """:func:`outcome_probabilities` with the per-channel constants folded
    in once; used by the scenario loop, where it runs every epoch."""

    __slots__ = ("_gain", "_sigma2", "_p_dark", "_vis", "_k_temp", "_phase0", "_k_bias",
                 "_pol", "_dead", "_clock")

    def __init__(self, source: SourceModel, interferometer: InterferometerModel,
                 detector: DetectorModel, fiber_transmittance: float, t_rx: float = 1.0,
                 channel_phase_offset: float = 0.0):
        if not 0 < t_rx <= 1:
            raise ConfigError(f"receiver excess loss t_rx must lie in (0, 1], got {t_rx}")
        self._gain = (source.mu_per_signal * fiber_transmittance * t_rx
                      * detector.quantum_efficiency)
        self._sigma2 = 2.0 * detector.timing_sigma_ps ** 2
        self._p_dark = detector.n_detectors * detector.dark_count_rate_hz / source.clock_rate_hz
        self._vis = visibility(interferometer.extinction_ratio_db)
        self._k_temp = interferometer.temp_to_phase_rad_per_K
        self._phase0 = channel_phase_offset
        self._k_bias = interferometer.bias_error_coeff
        self._pol = (None if interferometer.polarization_independent
                     else interferometer.pol_sensitivity)
        self._dead = source.clock_rate_hz * detector.dead_time_s
        self._clock = source.clock_rate_hz

    def probabilities(self, op: SystemOperatingPoint, env: EnvironmentState
                      ) -> OutcomeProbabilities:
        offset = op.detection_timing_offset + env.fiber_delay_ps
        p_signal = -math.expm1(-self._gain * math.exp(-offset * offset / self._sigma2))
        p_dark = self._p_dark
        if self._dead > 0:
            p_signal /= 1.0 + p_signal * self._dead
            p_dark /= 1.0 + p_dark * self._dead
        dphi = (self._k_temp * (op.amzi_temperature + env.amzi_temp_error_K)
                + self._phase0 - op.phase_comp_amplitude)
        bias = op.encoder_bias + env.bias_drift
        e = 0.5 * (1.0 - self._vis * math.cos(dphi)) + self._k_bias * bias * bias
        if self._pol is not None:
            e += self._pol * math.sin(env.polarization_angle_rad) ** 2
        e = min(max(e, 0.0), 0.5)
        return OutcomeProbabilities(p_signal, p_dark, e, 0.5, self._clock)


def epoch_qber(probs: OutcomeProbabilities) -> float:
    """Expected QBER: signal clicks err at the conditional rate, dark clicks at 1/2."""
    total = probs.p_signal_click + probs.p_dark_click
    if total <= 0:
        raise EmptyBlockError("no clicks expected on this channel")
    return (probs.conditional_error * probs.p_signal_click + 0.5 * probs.p_dark_click) / total


def expected_epoch_stats(probs: OutcomeProbabilities, duration_s: float,
                         channel: WavelengthChannel, epoch_index: int = 0) -> EpochStats:
    """Noise-free stats: counts rounded, rate and QBER left exact."""
    gates = int(round(probs.clock_rate_hz * duration_s))
    sig = probs.p_signal_click * gates
    dark = probs.p_dark_click * gates
    sifted = probs.p_sift_keep * (sig + dark)
    qber = epoch_qber(probs) if sig + dark > 0 else math.nan
    n_sifted = int(round(sifted))
    n_err = 0 if math.isnan(qber) else min(int(round(qber * sifted)), n_sifted)
    return EpochStats(epoch_index, channel, gates, int(round(sig)), int(round(dark)),
                      min(n_sifted, int(round(sig)) + int(round(dark))), n_err, qber,
                      sifted / duration_s)


@dataclass
class EpochResult:
    stats: EpochStats
    alice_bits: np.ndarray | None = None
    bob_bits: np.ndarray | None = None
    alice_bases: np.ndarray | None = None
    bob_bases: np.ndarray | None = None

    def __iter__(self):
        return iter((self.stats, self.alice_bits, self.bob_bits,
                     self.alice_bases, self.bob_bases))


def _stats(epoch_index, channel, gates, sig, dark, sifted, errors, duration_s):
    qber = errors / sifted if sifted else math.nan
    return EpochStats(epoch_index, channel, int(gates), int(sig), int(dark),
                      int(sifted), int(errors), qber, sifted / duration_s)


def simulate_epoch(mode: str, duration_s: float, probs: OutcomeProbabilities,
                   rng: np.random.Generator, *, channel: WavelengthChannel | None = None,
                   epoch_index: int = 0, keep_bits: bool = True,
                   pulse_mc_cap: int = DEFAULT_PULSE_MC_CAP) -> EpochResult:
    """Simulate one epoch of transmission.

    Bit streams, when kept, hold one entry per click (gates without a click
    carry no receiver bit). Sifting them with :func:`wdmqkd.distill.sift`
    reproduces ``stats.sifted_bits`` and ``stats.sifted_errors``.
    """
    if not duration_s > 0:
        raise ValueError("duration_s must be > 0")
    if channel is None:
        channel = WavelengthChannel(0, 1550.92)
    gates = int(round(probs.clock_rate_hz * duration_s))
    if mode == PULSE_MC:
        if gates > pulse_mc_cap:
            raise CapExceededError(
                f"{gates} gates exceed the pulse_mc cap of {pulse_mc_cap}; use rate_level mode")
        return _simulate_pulse_mc(gates, duration_s, probs, rng, channel, epoch_index)
    if mode == RATE_LEVEL:
        return _simulate_rate_level(gates, duration_s, probs, rng, channel, epoch_index,
                                    keep_bits)
    raise ValueError(f"unknown mode {mode!r}")


def _simulate_pulse_mc(gates, duration_s, probs, rng, channel, epoch_index):
    u = rng.random(gates)
    signal = u < probs.p_signal_click
    dark = (~signal) & (u < probs.p_signal_click + probs.p_dark_click)
    clicked = np.flatnonzero(signal | dark)
    n = clicked.size
    is_signal = signal[clicked]
    alice_bits = rng.integers(0, 2, n, dtype=np.uint8)
    alice_bases = rng.integers(0, 2, n, dtype=np.uint8)
    bob_bases = rng.integers(0, 2, n, dtype=np.uint8)
    flip = rng.random(n) < probs.conditional_error
    random_bits = rng.integers(0, 2, n, dtype=np.uint8)
    bob_bits = np.where(is_signal, alice_bits ^ flip.astype(np.uint8), random_bits)
    keep = alice_bases == bob_bases
    sifted = int(keep.sum())
    errors = int((alice_bits[keep] != bob_bits[keep]).sum())
    stats = _stats(epoch_index, channel, gates, int(is_signal.sum()),
                   int(n - is_signal.sum()), sifted, errors, duration_s)
    return EpochResult(stats, alice_bits, bob_bits.astype(np.uint8), alice_bases, bob_bases)


def _draw_counts(gates, probs, rng):
    """Signal/dark clicks split into (sifted correct, sifted wrong, unsifted).

    Large-gate epochs use independent Poisson thinnings of the click
    processes; small or high-probability epochs use the exact
    multinomial-binomial chain. Both have the same means.
    """
    p_sig, p_dark, keep, e = (probs.p_signal_click, probs.p_dark_click,
                              probs.p_sift_keep, probs.conditional_error)
    if gates >= POISSON_MIN_GATES and p_sig + p_dark <= POISSON_MAX_P:
        # scalar draws: array-valued poisson() costs ~10x more per call here
        pois = rng.poisson
        s, d = gates * p_sig, gates * p_dark
        return [int(pois(s * keep * (1 - e))), int(pois(s * keep * e)), int(pois(s * (1 - keep))),
                int(pois(d * keep * 0.5)), int(pois(d * keep * 0.5)), int(pois(d * (1 - keep)))]
    sig = int(rng.binomial(gates, p_sig)) if p_sig > 0 else 0
    rest = 1.0 - p_sig
    dark = int(rng.binomial(gates - sig, min(p_dark / rest, 1.0))) if p_dark > 0 and rest > 0 else 0
    s_sig = int(rng.binomial(sig, keep)) if sig else 0
    s_dark = int(rng.binomial(dark, keep)) if dark else 0
    e_sig = int(rng.binomial(s_sig, e)) if s_sig else 0
    e_dark = int(rng.binomial(s_dark, 0.5)) if s_dark else 0
    return [s_sig - e_sig, e_sig, sig - s_sig, s_dark - e_dark, e_dark, dark - s_dark]


def rate_level_stats(probs: OutcomeProbabilities, duration_s: float, rng: np.random.Generator,
                     channel: WavelengthChannel, epoch_index: int = 0) -> EpochStats:
    """Aggregate counts of one rate-level epoch, without bit streams."""
    gates = int(round(probs.clock_rate_hz * duration_s))
    c = _draw_counts(gates, probs, rng)
    sifted = c[0] + c[1] + c[3] + c[4]
    err = c[1] + c[4]
    return EpochStats(epoch_index, channel, gates, c[0] + c[1] + c[2], c[3] + c[4] + c[5],
                      sifted, err, err / sifted if sifted else math.nan, sifted / duration_s)


def _simulate_rate_level(gates, duration_s, probs, rng, channel, epoch_index, keep_bits):
    stats = rate_level_stats(probs, duration_s, rng, channel, epoch_index)
    if not keep_bits:
        return EpochResult(stats)
    return EpochResult(stats, *synthesize_streams(stats.signal_clicks + stats.dark_clicks,
                                                  stats.sifted_bits, stats.sifted_errors, rng))


def synthesize_streams(clicks: int, sifted: int, errors: int, rng: np.random.Generator):
    """Bit and basis streams of length ``clicks`` with exactly ``sifted``
    basis matches and exactly ``errors`` disagreements among them."""
    alice_bits = rng.integers(0, 2, clicks, dtype=np.uint8)
    alice_bases = rng.integers(0, 2, clicks, dtype=np.uint8)
    match = np.zeros(clicks, dtype=bool)
    match[rng.choice(clicks, size=sifted, replace=False)] = True
    bob_bases = np.where(match, alice_bases, 1 - alice_bases).astype(np.uint8)
    bob_bits = rng.integers(0, 2, clicks, dtype=np.uint8)
    matched = np.flatnonzero(match)
    flips = np.zeros(sifted, dtype=np.uint8)
    flips[rng.choice(sifted, size=errors, replace=False)] = 1
    bob_bits[matched] = alice_bits[matched] ^ flips
    return alice_bits, bob_bits, alice_bases, bob_bases
