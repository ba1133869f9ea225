"""CSV time series, JSON summary and JSON-lines event log."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .report import RunReport

CSV_COLUMNS = ("sim_time_s", "channel", "qber", "sifted_rate_bps", "secure_rate_bps",
               "timing_offset_ps", "encoder_bias", "amzi_temp_K", "phase_comp_rad",
               "fiber_delay_ps", "polarization_rad")

TIMESERIES_CSV = "timeseries.csv"
SUMMARY_JSON = "summary.json"
EVENTS_JSONL = "events.jsonl"
RUN_META_JSON = "run_meta.json"
CHECKPOINT = "checkpoint.pkl"


class OutputError(OSError):
    pass


_ROW_FORMAT = ",".join(["%.10g", "%d"] + ["%.10g"] * 9)


def record_row(rec) -> list[str]:
    return format_row(rec).split(",")


def format_row(rec) -> str:
    op = rec.op_point
    # %g renders NaN as "nan"
    return _ROW_FORMAT % (rec.sim_time_s, rec.channel, rec.qber, rec.sifted_rate_bps,
                          rec.secure_rate_bps, op.detection_timing_offset, op.encoder_bias,
                          op.amzi_temperature, op.phase_comp_amplitude,
                          rec.fiber_delay_ps, rec.polarization_rad)


def _write(path: Path, text: str, mode: str) -> int:
    try:
        with open(path, mode, newline="") as fh:
            fh.write(text)
            fh.flush()
            return fh.tell()
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def emit_records(records, path: Path, header: bool) -> int:
    """Append rows (and optionally the header); return the new file size."""
    lines = [",".join(CSV_COLUMNS)] if header else []
    lines.extend(format_row(r) for r in records)
    text = "\n".join(lines) + "\n" if lines else ""
    return _write(path, text, "w" if header else "a")


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def emit_events(events, path: Path, truncate: bool = False) -> int:
    text = "".join(json.dumps(_clean(e), sort_keys=True) + "\n" for e in events)
    return _write(path, text, "w" if truncate else "a")


def emit_summary(report: RunReport, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    _write(out_dir / SUMMARY_JSON,
           json.dumps(_clean(report.summary_dict()), indent=2, sort_keys=True) + "\n", "w")
    _write(out_dir / RUN_META_JSON,
           json.dumps({"wall_clock_s": report.wall_clock_s}, indent=2) + "\n", "w")


def emit_outputs(records, report: RunReport, out_dir, events=()) -> None:
    """One-shot writer: CSV with header, summary JSON and event log."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out_dir}: {exc}") from exc
    emit_records(records, out_dir / TIMESERIES_CSV, header=True)
    emit_events(events, out_dir / EVENTS_JSONL, truncate=True)
    emit_summary(report, out_dir)


def load_summary(out_dir) -> RunReport:
    path = Path(out_dir) / SUMMARY_JSON
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    meta = Path(out_dir) / RUN_META_JSON
    wall = json.loads(meta.read_text())["wall_clock_s"] if meta.exists() else 0.0
    return RunReport.from_summary_dict(data, wall)


def read_timeseries(out_dir) -> dict[str, list]:
    """Columns of the time-series CSV as float lists (channel as int)."""
    path = Path(out_dir) / TIMESERIES_CSV
    cols: dict[str, list] = {c: [] for c in CSV_COLUMNS}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_COLUMNS:
                raise OutputError(f"{path}: unexpected header {header}")
            for row in reader:
                for name, value in zip(CSV_COLUMNS, row):
                    cols[name].append(int(value) if name == "channel" else float(value))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    return cols


def read_events(out_dir) -> list[dict]:
    path = Path(out_dir) / EVENTS_JSONL
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
