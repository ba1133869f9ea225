"""Scenario orchestration with hourly checkpoints and resumable outputs."""

from __future__ import annotations

import logging
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .config import ScenarioConfig
from .outputs import (CHECKPOINT, EVENTS_JSONL, TIMESERIES_CSV, emit_events, emit_records,
                      emit_summary)
from .report import RunReport, summarize
from .simulation import ChannelRunner, advance_all

log = logging.getLogger(__name__)


class CheckpointError(RuntimeError):
    pass


@dataclass
class RunResult:
    report: RunReport
    records: list = field(default_factory=list)
    events: list = field(default_factory=list)
    out_dir: Path | None = None


@dataclass
class _Progress:
    runners: list
    chunk: int = 0
    csv_bytes: int = 0
    events_bytes: int = 0
    segments: list = field(default_factory=list)  # [start_s, end_s] per process lifetime
    digest: str = ""


def _report(cfg: ScenarioConfig, prog: _Progress, completed: bool, wall: float) -> RunReport:
    span = max((end - start for start, end in prog.segments), default=0.0)
    sim = prog.runners[0].epoch * cfg.epoch_s if prog.runners else 0.0
    return summarize({r.cfg.index: r.totals for r in prog.runners},
                     {r.cfg.index: r.cfg.wavelength_nm for r in prog.runners},
                     sim, cfg.fiber.loss_db, span, cfg.digest(), completed, wall)


def _save_checkpoint(path: Path, prog: _Progress) -> None:
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        pickle.dump(prog, fh, protocol=pickle.HIGHEST_PROTOCOL)
    os.replace(tmp, path)


def _load_checkpoint(path: Path, cfg: ScenarioConfig) -> _Progress:
    try:
        with open(path, "rb") as fh:
            prog = pickle.load(fh)
    except (OSError, pickle.UnpicklingError, EOFError) as exc:
        raise CheckpointError(f"cannot load checkpoint {path}: {exc}") from exc
    if prog.digest != cfg.digest():
        raise CheckpointError(f"checkpoint {path} was written for a different config "
                              f"({prog.digest} != {cfg.digest()})")
    return prog


def _truncate(path: Path, size: int) -> None:
    with open(path, "r+b") as fh:
        fh.truncate(size)


def run_scenario(cfg: ScenarioConfig, out_dir=None, *, resume=None, workers: int = 1,
                 keep_records: bool | None = None) -> RunResult:
    """Run a scenario to completion.

    With ``out_dir`` the CSV and event log are appended chunk by chunk and a
    checkpoint is written after every chunk; ``resume`` names such a
    checkpoint to continue from. Records are kept in memory when
    ``keep_records`` is true (default: only when no ``out_dir`` is given).
    """
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else None
    keep = (out is None) if keep_records is None else keep_records
    chunk_epochs = max(1, int(round(cfg.checkpoint_period_s / cfg.epoch_s)))
    total_epochs = cfg.n_epochs
    n_chunks = -(-total_epochs // chunk_epochs)

    if resume is not None:
        prog = _load_checkpoint(Path(resume), cfg)
        if out is None:
            out = Path(resume).parent
        _truncate(out / TIMESERIES_CSV, prog.csv_bytes)
        _truncate(out / EVENTS_JSONL, prog.events_bytes)
        t_resume = cfg.start_time_s + prog.runners[0].epoch * cfg.epoch_s
        prog.segments.append([t_resume, t_resume])
        resumed = [{"type": "resumed", "sim_time_s": t_resume, "channel": -1}]
        prog.events_bytes = emit_events(resumed, out / EVENTS_JSONL)
        log.info("resuming at chunk %d/%d", prog.chunk, n_chunks)
    else:
        runners = [ChannelRunner.create(cfg, ch) for ch in cfg.channels]
        prog = _Progress(runners, segments=[[cfg.start_time_s, cfg.start_time_s]],
                         digest=cfg.digest())
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            prog.csv_bytes = emit_records([], out / TIMESERIES_CSV, header=True)
            prog.events_bytes = emit_events([], out / EVENTS_JSONL, truncate=True)

    all_records, all_events = [], []
    pool = ProcessPoolExecutor(workers) if workers > 1 and len(cfg.channels) > 1 else None
    try:
        while prog.chunk < n_chunks:
            done = prog.chunk * chunk_epochs
            n = min(chunk_epochs, total_epochs - done)
            final = prog.chunk == n_chunks - 1
            prog.runners, records, events = advance_all(prog.runners, n, final, workers, pool)
            prog.chunk += 1
            prog.segments[-1][1] = cfg.start_time_s + prog.runners[0].epoch * cfg.epoch_s
            if keep:
                all_records.extend(records)
                all_events.extend(events)
            if out is not None:
                prog.csv_bytes = emit_records(records, out / TIMESERIES_CSV, header=False)
                prog.events_bytes = emit_events(events, out / EVENTS_JSONL)
                _save_checkpoint(out / CHECKPOINT, prog)
            log.debug("chunk %d/%d done", prog.chunk, n_chunks)
    except KeyboardInterrupt:
        if out is not None:
            report = _report(cfg, prog, False, time.perf_counter() - started)
            emit_summary(report, out)
            log.warning("interrupted; partial summary written to %s", out)
        raise
    finally:
        if pool is not None:
            pool.shutdown()

    report = _report(cfg, prog, True, time.perf_counter() - started)
    if out is not None:
        emit_summary(report, out)
    return RunResult(report, all_records, all_events, out)
