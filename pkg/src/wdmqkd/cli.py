"""Command-line entry point: ``wdmqkd run | summarize | compare``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigParseError, ConfigValidationError, load_config, with_overrides
from .optics import MODES
from .outputs import OutputError, load_summary, read_timeseries
from .report import format_report
from .run import CheckpointError, run_scenario

log = logging.getLogger("wdmqkd")

QBER_ALARM = 0.05


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, duration_s=args.duration, full=args.full,
                         mode=args.mode, stabilizer=False if args.no_stabilizer else None,
                         output_dir=args.out)
    # a checkpoint resumes into the directory it was written to
    out = Path(args.resume).parent if args.resume and not args.out else Path(cfg.output_dir)
    log.info("running %d channel(s) for %.0f s of simulated time into %s",
             len(cfg.channels), cfg.duration_s, out)
    result = run_scenario(cfg, out, resume=args.resume, workers=args.workers)
    print(format_report(result.report))
    print(f"wall clock {result.report.wall_clock_s:.1f} s; outputs in {out}")
    return 0


def _cmd_summarize(args) -> int:
    print(format_report(load_summary(args.dir)))
    return 0


def windowed_means(times: np.ndarray, values: np.ndarray, window_s: float):
    """Mean of ``values`` in consecutive windows of ``window_s``; NaNs skipped."""
    if len(times) == 0:
        return np.array([]), np.array([])
    bins = np.floor((times - times[0]) / window_s).astype(int)
    n = bins[-1] + 1
    ok = ~np.isnan(values)
    sums = np.bincount(bins[ok], values[ok], minlength=n)
    counts = np.bincount(bins[ok], minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts
    starts = times[0] + window_s * np.arange(n)
    return starts, means


def qber_profile(out_dir, window_s: float) -> dict:
    """Mean and worst-case QBER of a run, overall and per channel."""
    ts = read_timeseries(out_dir)
    t = np.asarray(ts["sim_time_s"])
    ch = np.asarray(ts["channel"])
    q = np.asarray(ts["qber"])
    profile = {"mean_qber": float(np.nanmean(q)) if len(q) else math.nan,
               "max_epoch_qber": float(np.nanmax(q)) if len(q) else math.nan,
               "channels": {}}
    for c in np.unique(ch).tolist():
        sel = ch == c
        _, means = windowed_means(t[sel], q[sel], window_s)
        profile["channels"][c] = {
            "mean_qber": float(np.nanmean(q[sel])),
            "max_epoch_qber": float(np.nanmax(q[sel])),
            "max_window_qber": float(np.nanmax(means)),
        }
    return profile


def format_comparison(a: dict, b: dict, name_a: str, name_b: str, window_s: float) -> str:
    lines = [f"{'':>24} {name_a:>14} {name_b:>14}",
             f"{'mean QBER [%]':>24} {100 * a['mean_qber']:>14.3f} {100 * b['mean_qber']:>14.3f}",
             f"{'max epoch QBER [%]':>24} {100 * a['max_epoch_qber']:>14.3f} "
             f"{100 * b['max_epoch_qber']:>14.3f}"]
    for c in sorted(set(a["channels"]) | set(b["channels"])):
        ca, cb = a["channels"].get(c), b["channels"].get(c)
        for key, label in (("mean_qber", "mean"), ("max_epoch_qber", "max epoch"),
                           ("max_window_qber", f"max {window_s:g}s-window")):
            va = f"{100 * ca[key]:.3f}" if ca else "-"
            vb = f"{100 * cb[key]:.3f}" if cb else "-"
            lines.append(f"{f'ch{c} {label} [%]':>24} {va:>14} {vb:>14}")
    for name, p in ((name_a, a), (name_b, b)):
        flag = "exceeds" if p["max_epoch_qber"] > QBER_ALARM else "stays below"
        lines.append(f"{name}: epoch QBER {flag} {100 * QBER_ALARM:g} %")
    return "\n".join(lines)


def _cmd_compare(args) -> int:
    a = qber_profile(args.dir_a, args.window)
    b = qber_profile(args.dir_b, args.window)
    print(format_comparison(a, b, Path(args.dir_a).name or "A", Path(args.dir_b).name or "B",
                            args.window))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wdmqkd",
                                     description="WDM time-bin BB84 link simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("config", help="scenario config file")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float, metavar="S",
                     help="simulated seconds (default: the config's desk_duration_s)")
    run.add_argument("--full", action="store_true",
                     help="run the config's full duration_s (e.g. 30 days)")
    run.add_argument("--mode", choices=MODES)
    run.add_argument("--no-stabilizer", action="store_true")
    run.add_argument("--out", metavar="DIR")
    run.add_argument("--resume", metavar="CHECKPOINT")
    run.add_argument("--workers", type=int, default=1,
                     help="worker processes across channels")
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="print a finished run's summary")
    summ.add_argument("dir")
    summ.set_defaults(func=_cmd_summarize)

    cmp_ = sub.add_parser("compare", help="A/B QBER report of two runs")
    cmp_.add_argument("dir_a")
    cmp_.add_argument("dir_b")
    cmp_.add_argument("--window", type=float, default=600.0, metavar="S",
                      help="averaging window in simulated seconds")
    cmp_.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigParseError as exc:
        print(f"config parse error: {exc}", file=sys.stderr)
        return 2
    except ConfigValidationError as exc:
        print("invalid config:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return 2
    except (OutputError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted; partial results flushed", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
