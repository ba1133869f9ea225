#!/usr/bin/env python3
"""Stabilizer on/off comparison over one simulated day."""

import argparse
import sys
from pathlib import Path

from wdmqkd import cli
from wdmqkd.config import load_config, with_overrides
from wdmqkd.run import run_scenario

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "paper_2ch.cfg"))
    p.add_argument("--duration", type=float, default=86400)
    p.add_argument("--window", type=float, default=600)
    p.add_argument("--out", default="runs/ab")
    args = p.parse_args(argv)

    cfg = with_overrides(load_config(args.config), duration_s=args.duration)
    out = Path(args.out)
    run_scenario(cfg, out / "on")
    run_scenario(with_overrides(cfg, stabilizer=False), out / "off")
    return cli.main(["compare", str(out / "on"), str(out / "off"), "--window", str(args.window)])


if __name__ == "__main__":
    sys.exit(main())
