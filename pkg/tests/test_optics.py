import math

import numpy as np
import pytest
from scipy.optimize import brentq

from wdmqkd.core import SystemOperatingPoint, WavelengthChannel, db_to_transmittance
from wdmqkd.distill import sift
from wdmqkd.environment import EnvironmentState
from wdmqkd.optics import (PULSE_MC, RATE_LEVEL, CapExceededError, ChannelOptics, ConfigError,
                           DetectorModel, InterferometerModel, OutcomeProbabilities, SourceModel,
                           epoch_qber, expected_epoch_stats, interference_error,
                           outcome_probabilities, simulate_epoch, timing_factor, visibility)

T_FIBER = db_to_transmittance(12.6)
NOMINAL = SystemOperatingPoint()
FRESH = EnvironmentState()
CH = WavelengthChannel(0, 1547.72)


def probs_at(op=NOMINAL, env=FRESH, t_rx=1.0, source=None, interf=None, det=None,
             t_fiber=T_FIBER, offset=0.0):
    return outcome_probabilities(source or SourceModel(), interf or InterferometerModel(),
                                 det or DetectorModel(), t_fiber, op, env, t_rx, offset)


@pytest.mark.parametrize("offset, expected, tol", [
    (0.0, 1.0, 0.0),
    (50.0, 0.800, 0.002),
    (74.85, math.exp(-0.5), 1e-3),
])
def test_timing_factor(offset, expected, tol):
    assert timing_factor(offset, 74.85) == pytest.approx(expected, abs=tol)


def test_default_sigma_is_pinned_by_the_50ps_point():
    assert DetectorModel().timing_sigma_ps == pytest.approx(50 / math.sqrt(2 * math.log(1.25)),
                                                            abs=0.01)


@pytest.mark.parametrize("er_db, dphi, expected, tol", [
    (20.0, 0.0, 1 / 101, 1e-5),
    (math.inf, math.pi, 1.0, 1e-15),
    (20.0, math.pi / 2, 0.5, 1e-12),
])
def test_interference_error(er_db, dphi, expected, tol):
    assert interference_error(er_db, dphi) == pytest.approx(expected, abs=tol)


def test_interference_error_period_and_floor():
    er = 10 ** 2.0
    for dphi in np.linspace(-3, 3, 13):
        assert interference_error(20.0, dphi) == pytest.approx(
            interference_error(20.0, dphi + 2 * math.pi), abs=1e-12)
        assert interference_error(20.0, dphi) >= 1 / (er + 1) - 1e-15
    assert visibility(20.0) == pytest.approx(99 / 101)


def test_interference_error_rejects_non_positive_er():
    with pytest.raises(ValueError):
        interference_error(0.0, 0.0)


def test_p_signal_example_operands():
    # mu * t_fiber * t_rx * eta with t_rx = 0.0137 gives ~4.71e-5 per gate
    p = probs_at(t_rx=0.0137)
    assert p.p_signal_click == pytest.approx(4.71e-5, rel=2e-3)


def test_p_dark_two_detectors():
    assert probs_at().p_dark_click == pytest.approx(2.42e-6, abs=1e-8)


def test_no_light_means_no_signal():
    assert probs_at(source=SourceModel(mean_photon_number=0.0)).p_signal_click == 0.0


def test_t_rx_validation():
    for bad in (0.0, 1.5):
        with pytest.raises(ConfigError):
            probs_at(t_rx=bad)


@pytest.mark.parametrize("t_rx, target_bps", [(0.14740, 315.3e3), (0.07820, 168.0e3)])
def test_calibrated_t_rx_reproduces_sifted_rates(t_rx, target_bps):
    # oracle: solve 0.5 * clock * (p_sig(t) + p_dark) = target independently
    clock, mu, eta = 1.24e9, 0.5, 0.125
    p_dark = 2 * 1500 / clock

    def rate(t):
        return 0.5 * clock * (1 - math.exp(-mu * T_FIBER * t * eta) + p_dark)

    solved = brentq(lambda t: rate(t) - target_bps, 1e-6, 1.0)
    assert t_rx == pytest.approx(solved, rel=1e-3)
    p = probs_at(t_rx=t_rx)
    assert 0.5 * clock * (p.p_signal_click + p.p_dark_click) == pytest.approx(target_bps,
                                                                             rel=1e-3)


def test_mu_per_pulse_flag_doubles_signal_mean():
    per_pair = probs_at(t_rx=0.1).p_signal_click
    per_pulse = probs_at(t_rx=0.1, source=SourceModel(mu_per_pair=False)).p_signal_click
    assert -math.log1p(-per_pulse) == pytest.approx(-2 * math.log1p(-per_pair))


def test_polarization_error_only_when_dependent():
    env = EnvironmentState(polarization_angle_rad=0.4)
    base = probs_at(env=env).conditional_error
    dep = probs_at(env=env, interf=InterferometerModel(polarization_independent=False))
    assert base == pytest.approx(1 / 101)
    assert dep.conditional_error == pytest.approx(1 / 101 + 0.5 * math.sin(0.4) ** 2)


def test_conditional_error_is_clamped():
    p = probs_at(op=SystemOperatingPoint(encoder_bias=1.0),
                 interf=InterferometerModel(bias_error_coeff=5.0))
    assert p.conditional_error == 0.5


def test_dead_time_lowers_rates():
    base = probs_at(t_rx=0.1)
    dead = probs_at(t_rx=0.1, det=DetectorModel(dead_time_s=50e-9))
    assert dead.p_signal_click < base.p_signal_click
    scale = 1.24e9 * 50e-9
    assert dead.p_signal_click == pytest.approx(
        base.p_signal_click / (1 + base.p_signal_click * scale))


def test_nominal_point_is_optimal_on_each_axis():
    best_q = epoch_qber(probs_at(t_rx=0.1))
    best_p = probs_at(t_rx=0.1).p_signal_click
    for field, step in (("detection_timing_offset", 12.5), ("encoder_bias", 0.01),
                        ("amzi_temperature", 0.01), ("phase_comp_amplitude", 0.01)):
        for sign in (-1, 1):
            op = SystemOperatingPoint(**{field: sign * step})
            p = probs_at(op=op, t_rx=0.1)
            assert epoch_qber(p) >= best_q - 1e-15
            assert p.p_signal_click <= best_p + 1e-18


def test_phase_offset_is_compensated():
    p = probs_at(op=SystemOperatingPoint(phase_comp_amplitude=0.3), offset=0.3)
    assert p.conditional_error == pytest.approx(1 / 101)


def test_channel_optics_matches_reference(rng):
    src, interf = SourceModel(mu_per_pair=False), InterferometerModel(
        polarization_independent=False)
    det = DetectorModel(dead_time_s=20e-9)
    fast = ChannelOptics(src, interf, det, T_FIBER, 0.2, 0.15)
    for _ in range(200):
        op = SystemOperatingPoint(*rng.normal(0, [50, 0.2, 0.02, 0.3]))
        env = EnvironmentState(*rng.normal(0, [30, 0.5, 0.03, 0.2]), 0.0)
        ref = outcome_probabilities(src, interf, det, T_FIBER, op, env, 0.2, 0.15)
        got = fast.probabilities(op, env)
        for name in ("p_signal_click", "p_dark_click", "conditional_error", "p_sift_keep"):
            assert getattr(got, name) == pytest.approx(getattr(ref, name), rel=1e-12, abs=1e-18)


@pytest.mark.parametrize("e, ps, pd, expected", [
    (0.01, 1e-3, 2e-5, 0.0196),
    (0.013, 1e-3, 0.0, 0.013),
    (0.01, 0.0, 1e-5, 0.5),
])
def test_epoch_qber(e, ps, pd, expected):
    assert epoch_qber(OutcomeProbabilities(ps, pd, e)) == pytest.approx(expected, abs=1e-4)


def test_epoch_qber_empty_channel():
    with pytest.raises(ValueError):
        epoch_qber(OutcomeProbabilities(0.0, 0.0, 0.01))


@pytest.mark.parametrize("mode", [PULSE_MC, RATE_LEVEL])
def test_no_light_no_dark_gives_zero_stats(mode, rng):
    stats = simulate_epoch(mode, 1e-3, OutcomeProbabilities(0.0, 0.0, 0.01), rng,
                           channel=CH).stats
    assert (stats.signal_clicks, stats.dark_clicks, stats.sifted_bits,
            stats.sifted_errors) == (0, 0, 0, 0)
    assert math.isnan(stats.qber)


@pytest.mark.parametrize("mode", [PULSE_MC, RATE_LEVEL])
def test_noiseless_channel_streams_agree(mode, rng):
    probs = OutcomeProbabilities(0.01, 0.0, 0.0)
    stats, a, b, ab, bb = simulate_epoch(mode, 1e-4, probs, rng, channel=CH)
    block = sift(a, ab, b, bb)
    assert stats.sifted_errors == 0
    np.testing.assert_array_equal(block.bits_alice, block.bits_bob)


@pytest.mark.parametrize("mode", [PULSE_MC, RATE_LEVEL])
def test_streams_reproduce_stats(mode, rng):
    probs = OutcomeProbabilities(2e-3, 1e-4, 0.05)
    stats, a, b, ab, bb = simulate_epoch(mode, 1e-4, probs, rng, channel=CH)
    assert len(a) == stats.signal_clicks + stats.dark_clicks
    block = sift(a, ab, b, bb)
    assert len(block) == stats.sifted_bits
    assert block.mismatches() == stats.sifted_errors


def test_pulse_mc_cap(rng):
    with pytest.raises(CapExceededError, match="rate_level"):
        simulate_epoch(PULSE_MC, 1.0, OutcomeProbabilities(1e-4, 0, 0.01), rng,
                       pulse_mc_cap=1000)


def test_pulse_mc_sift_rate_within_3_sigma(rng):
    probs = OutcomeProbabilities(2e-3, 5e-4, 0.02)
    stats = simulate_epoch(PULSE_MC, 1e-3, probs, rng).stats  # 1.24e6 gates
    p = 0.5 * (probs.p_signal_click + probs.p_dark_click)
    n = stats.gated_pulses
    assert abs(stats.sifted_bits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


def test_rate_level_large_epoch_means(rng):
    # 1 s epochs take the Poisson-thinning path; check it against the expectation
    probs = probs_at(t_rx=0.1474)
    exp = expected_epoch_stats(probs, 1.0, CH)
    draws = [simulate_epoch(RATE_LEVEL, 1.0, probs, rng, channel=CH, keep_bits=False).stats
             for _ in range(200)]
    sifted = np.array([d.sifted_bits for d in draws])
    errors = np.array([d.sifted_errors for d in draws])
    assert abs(sifted.mean() - exp.sifted_bits) < 4 * sifted.std() / math.sqrt(200)
    assert errors.mean() / sifted.mean() == pytest.approx(epoch_qber(probs), rel=0.01)


def test_unknown_mode(rng):
    with pytest.raises(ValueError):
        simulate_epoch("photonic", 1e-3, OutcomeProbabilities(1e-4, 0, 0.01), rng)


def test_model_validation():
    with pytest.raises(ConfigError):
        SourceModel(mean_photon_number=1.5)
    with pytest.raises(ConfigError):
        InterferometerModel(extinction_ratio_db=0.0)
    with pytest.raises(ConfigError):
        DetectorModel(quantum_efficiency=1.2)
