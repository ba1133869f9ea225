import math

import numpy as np
import pytest

from wdmqkd.core import (DEFAULT_STEPS, GRID_WAVELENGTHS_NM, Basis, DomainError,
                         EmptyBlockError, EpochStats, ParamId, SystemOperatingPoint,
                         WavelengthChannel, binary_entropy, binary_entropy_array,
                         db_to_transmittance, nearest_grid_wavelength, qber_from_counts)


def test_grid_spans_eight_slots():
    assert len(GRID_WAVELENGTHS_NM) == 8
    assert GRID_WAVELENGTHS_NM[0] == pytest.approx(1545.32, abs=0.01)
    assert GRID_WAVELENGTHS_NM[-1] == pytest.approx(1550.92, abs=0.01)
    # 100 GHz spacing is ~0.8 nm here
    assert np.all(np.diff(GRID_WAVELENGTHS_NM) == pytest.approx(0.8, abs=0.01))


@pytest.mark.parametrize("wl", [1547.72, 1550.92, 1545.32])
def test_table_wavelengths_are_grid_slots(wl):
    assert nearest_grid_wavelength(wl) == pytest.approx(wl, abs=0.01)
    WavelengthChannel(0, wl)


@pytest.mark.parametrize("index, wl", [(8, 1547.72), (-1, 1547.72), (0, 1547.3), (0, 1551.7)])
def test_channel_rejects_bad_index_or_wavelength(index, wl):
    with pytest.raises(ValueError):
        WavelengthChannel(index, wl)


def test_basis_has_two_values():
    assert [b.name for b in Basis] == ["TIME", "PHASE"]


@pytest.mark.parametrize("p, expected, tol", [
    (0.5, 1.0, 1e-15),
    (0.0, 0.0, 0.0),
    (1.0, 0.0, 0.0),
    (0.0161, 0.1189, 1e-4),
])
def test_binary_entropy_examples(p, expected, tol):
    assert binary_entropy(p) == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("p", [-0.01, 1.01, math.nan])
def test_binary_entropy_domain(p):
    with pytest.raises(DomainError):
        binary_entropy(p)


def test_binary_entropy_array_matches_scalar():
    ps = np.linspace(0, 1, 101)
    np.testing.assert_allclose(binary_entropy_array(ps), [binary_entropy(p) for p in ps],
                               atol=1e-15)
    with pytest.raises(DomainError):
        binary_entropy_array([0.2, 1.5])


@pytest.mark.parametrize("loss, expected, tol", [
    (0.0, 1.0, 0.0),
    (12.6, 0.05495, 1e-5),
    (10.0, 0.1, 1e-15),
])
def test_db_to_transmittance(loss, expected, tol):
    assert db_to_transmittance(loss) == pytest.approx(expected, abs=tol)


def test_db_to_transmittance_rejects_gain():
    with pytest.raises(DomainError):
        db_to_transmittance(-0.1)


@pytest.mark.parametrize("errors, sifted, expected", [(17, 1000, 0.017), (0, 1000, 0.0),
                                                      (161, 10000, 0.0161)])
def test_qber_from_counts(errors, sifted, expected):
    assert qber_from_counts(errors, sifted) == expected


def test_qber_from_counts_empty_and_invalid():
    with pytest.raises(EmptyBlockError):
        qber_from_counts(0, 0)
    with pytest.raises(DomainError):
        qber_from_counts(5, 4)


class TestOperatingPoint:
    def test_with_value_snaps_to_grid(self):
        op = SystemOperatingPoint().with_value(ParamId.DETECTION_TIMING, 31.0)
        assert op.detection_timing_offset == 25.0
        op = op.with_value(ParamId.AMZI_TEMPERATURE, 0.0149)
        assert op.amzi_temperature == pytest.approx(0.01)
        assert op.is_quantized()

    def test_with_value_clamps_inside_bounds(self):
        op = SystemOperatingPoint().with_value(ParamId.DETECTION_TIMING, 1e4)
        assert op.detection_timing_offset == 400.0
        # 2 pi is not a multiple of 0.01; the clamp must not snap outward
        op = SystemOperatingPoint().with_value(ParamId.PHASE_COMP_AMPLITUDE, 100.0)
        assert op.phase_comp_amplitude <= 2 * math.pi
        assert op.phase_comp_amplitude == pytest.approx(6.28)

    def test_other_fields_untouched(self):
        op = SystemOperatingPoint(12.5, 0.02, 0.03, 0.04)
        new = op.with_value(ParamId.ENCODER_BIAS, 0.5)
        assert (new.detection_timing_offset, new.encoder_bias, new.amzi_temperature,
                new.phase_comp_amplitude) == (12.5, 0.5, 0.03, 0.04)

    def test_get_and_quantized(self):
        op = SystemOperatingPoint(13.0, 0.0, 0.0, 0.0)
        assert op.get(ParamId.DETECTION_TIMING) == 13.0
        assert not op.is_quantized()
        assert op.quantized().detection_timing_offset == 12.5
        assert set(DEFAULT_STEPS) == set(ParamId)


class TestEpochStats:
    def test_valid(self):
        s = EpochStats(0, WavelengthChannel(0, 1547.72), 100, 10, 2, 6, 1, 1 / 6, 6.0)
        assert s.secure_rate_bps == 0.0

    @pytest.mark.parametrize("counts", [(10, 2, 13, 1), (10, 2, 6, 7), (-1, 2, 0, 0)])
    def test_rejects_inconsistent_counts(self, counts):
        sig, dark, sifted, err = counts
        with pytest.raises(ValueError):
            EpochStats(0, WavelengthChannel(0, 1547.72), 100, sig, dark, sifted, err, 0.0, 0.0)
