import json
import math

import numpy as np
import pytest

from wdmqkd import cli, simulation
from wdmqkd.config import parse_config, with_overrides
from wdmqkd.optics import PULSE_MC
from wdmqkd.outputs import (CHECKPOINT, CSV_COLUMNS, EVENTS_JSONL, SUMMARY_JSON, TIMESERIES_CSV,
                            OutputError, emit_outputs, load_summary, read_events,
                            read_timeseries)
from wdmqkd.run import CheckpointError, run_scenario

from .conftest import PAPER_CFG, minimal_config_text


@pytest.fixture
def small_cfg():
    return parse_config(minimal_config_text(duration=300, checkpoint=60))


def test_row_accounting(tmp_path):
    cfg = parse_config(minimal_config_text(duration=10))
    run_scenario(cfg, tmp_path)
    lines = (tmp_path / TIMESERIES_CSV).read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 10 * 2 + 1


def test_single_epoch_run(tmp_path):
    cfg = parse_config(minimal_config_text(duration=1))
    result = run_scenario(cfg, keep_records=True)
    assert [r.channel for r in result.records] == [0, 1]
    assert result.report.per_channel[0].epochs == 1


def test_time_strictly_increases_per_channel(small_cfg, tmp_path):
    run_scenario(small_cfg, tmp_path)
    ts = read_timeseries(tmp_path)
    t, ch = np.array(ts["sim_time_s"]), np.array(ts["channel"])
    for c in (0, 1):
        assert np.all(np.diff(t[ch == c]) > 0)
    assert np.all(np.diff(t) >= 0)


def test_rerun_is_byte_identical(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(small_cfg, a)
    run_scenario(small_cfg, b)
    for name in (TIMESERIES_CSV, SUMMARY_JSON, EVENTS_JSONL):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_worker_count_does_not_change_outputs(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_scenario(small_cfg, a, workers=1)
    run_scenario(small_cfg, b, workers=2)
    for name in (TIMESERIES_CSV, SUMMARY_JSON):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_other_seed_differs(small_cfg, tmp_path):
    run_scenario(small_cfg, tmp_path / "a")
    run_scenario(with_overrides(small_cfg, seed=8), tmp_path / "b")
    assert ((tmp_path / "a" / TIMESERIES_CSV).read_bytes()
            != (tmp_path / "b" / TIMESERIES_CSV).read_bytes())


def test_summary_json_round_trip(small_cfg, tmp_path):
    result = run_scenario(small_cfg, tmp_path)
    loaded = load_summary(tmp_path).summary_dict()
    original = result.report.summary_dict()

    def compare(x, y):
        if isinstance(x, dict):
            assert x.keys() == y.keys()
            for k in x:
                compare(x[k], y[k])
        elif isinstance(x, list):
            assert len(x) == len(y)
            for u, v in zip(x, y):
                compare(u, v)
        elif isinstance(x, float):
            assert y == pytest.approx(x, rel=1e-9) or (math.isnan(x) and y is None)
        else:
            assert x == y

    compare(original, loaded)
    data = json.loads((tmp_path / SUMMARY_JSON).read_text())
    for key in ("per_channel", "totals", "channel_loss_db", "normalized_secure_bits",
                "uninterrupted_span_s", "config_digest"):
        assert key in data
    assert set(data["totals"]) >= {"qber_avg", "sifted_bps_avg", "secure_bps_avg",
                                   "secure_bits_total"}


def test_secure_bits_equal_distill_accounting(tmp_path):
    cfg = parse_config(minimal_config_text(duration=1200, extra="[distill]\nperiod_s = 300\n"))
    result = run_scenario(cfg, tmp_path)
    events = [e for e in read_events(tmp_path) if e["type"] == "distill"]
    assert len(events) == 2 * 4
    assert all(e["status"] == "ok" for e in events)
    assert result.report.totals["secure_bits_total"] == sum(e["secure_bits"] for e in events)
    for c in result.report.per_channel:
        assert c.secure_bits_total == sum(e["secure_bits"] for e in events
                                          if e["channel"] == c.channel)
        assert c.secure_bits_total <= c.sifted_bits_total
    r = result.report
    assert r.normalized_secure_bits == pytest.approx(
        r.totals["secure_bits_total"] / 10 ** (-r.channel_loss_db / 10), rel=1e-12)


def test_stabilizer_decisions_logged(small_cfg, tmp_path):
    run_scenario(small_cfg, tmp_path)
    decisions = [e for e in read_events(tmp_path) if e["type"] == "stabilizer"]
    assert decisions
    assert {d["parameter"] for d in decisions} == {
        "detection_timing_offset", "encoder_bias", "amzi_temperature", "phase_comp_amplitude"}
    assert all(d["offset"] in (-1, 0, 1) for d in decisions)


def test_disabled_stabilizer_holds_operating_point(small_cfg, tmp_path):
    run_scenario(with_overrides(small_cfg, stabilizer=False), tmp_path)
    ts = read_timeseries(tmp_path)
    for col in ("timing_offset_ps", "encoder_bias", "amzi_temp_K", "phase_comp_rad"):
        assert set(ts[col]) == {0.0}
    assert not [e for e in read_events(tmp_path) if e["type"] == "stabilizer"]


def test_pulse_mc_short_window(tmp_path):
    cfg = parse_config(minimal_config_text(duration=0.03).replace(
        "epoch_s = 1", "epoch_s = 0.01").replace("checkpoint_period_s = 3600",
                                                 "checkpoint_period_s = 0.01"))
    result = run_scenario(with_overrides(cfg, mode=PULSE_MC), tmp_path)
    c0 = result.report.per_channel[0]
    assert c0.epochs == 3
    assert 0.005 < c0.qber_avg < 0.04
    assert c0.sifted_bps_avg == pytest.approx(315e3, rel=0.1)


def test_resume_reproduces_uninterrupted_run(small_cfg, tmp_path, monkeypatch):
    full = tmp_path / "full"
    run_scenario(small_cfg, full)

    part = tmp_path / "part"
    real = simulation.advance_all
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise KeyboardInterrupt
        return real(*args, **kwargs)

    monkeypatch.setattr("wdmqkd.run.advance_all", flaky)
    with pytest.raises(KeyboardInterrupt):
        run_scenario(small_cfg, part)
    partial = load_summary(part)
    assert not partial.completed
    assert partial.sim_duration_s == 120.0
    monkeypatch.setattr("wdmqkd.run.advance_all", real)

    result = run_scenario(small_cfg, part, resume=part / CHECKPOINT)
    assert (part / TIMESERIES_CSV).read_bytes() == (full / TIMESERIES_CSV).read_bytes()
    a, b = load_summary(full), result.report
    assert b.completed and b.totals == a.totals
    assert a.uninterrupted_span_s == 300.0
    assert b.uninterrupted_span_s == 180.0
    assert [e["type"] for e in read_events(part)].count("resumed") == 1


def test_resume_rejects_other_config(small_cfg, tmp_path):
    run_scenario(small_cfg, tmp_path)
    with pytest.raises(CheckpointError):
        run_scenario(with_overrides(small_cfg, seed=99), tmp_path,
                     resume=tmp_path / CHECKPOINT)


def test_unwritable_output_reports_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError, match="file"):
        emit_outputs([], run_scenario(parse_config(minimal_config_text(duration=1))).report,
                     blocker / "sub")


# --- command line ------------------------------------------------------------

def test_cli_run_summarize_compare(tmp_path, capsys):
    a, b = tmp_path / "on", tmp_path / "off"
    assert cli.main(["run", str(PAPER_CFG), "--duration", "120", "--out", str(a)]) == 0
    assert cli.main(["run", str(PAPER_CFG), "--duration", "120", "--out", str(b),
                     "--no-stabilizer", "--seed", "5"]) == 0
    assert cli.main(["summarize", str(a)]) == 0
    assert "1547.72" in capsys.readouterr().out
    assert cli.main(["compare", str(a), str(b), "--window", "60"]) == 0
    out = capsys.readouterr().out
    assert "mean QBER" in out and "max epoch QBER" in out and "60s-window" in out


def test_cli_empty_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    assert cli.main(["run", str(path)]) != 0
    assert "parse error" in capsys.readouterr().err


def test_cli_invalid_config_lists_errors(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[scenario]\nepoch_s = 0\n[channel.0]\nwavelength_nm = 1500\n")
    assert cli.main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "epoch_s" in err and "wavelength_nm" in err


def test_cli_resume(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(minimal_config_text(duration=120, checkpoint=60))
    out = tmp_path / "o"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["run", str(cfg), "--resume", str(out / CHECKPOINT)]) == 0


def test_windowed_means():
    t = np.arange(10.0)
    v = np.array([1, 1, 3, 3, np.nan, 5, 5, 5, 5, 5], dtype=float)
    starts, means = cli.windowed_means(t, v, 2.0)
    assert starts.tolist() == [0, 2, 4, 6, 8]
    assert means.tolist() == [1, 3, 5, 5, 5]
