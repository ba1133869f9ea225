#!/usr/bin/env python3
"""Solve the calibrated constants shipped in configs/paper_2ch.cfg.

* t_rx per channel: receiver excess loss giving the target nominal sifted
  rate (aligned operating point, quiet environment);
* kappa: Calibrated-formula scale giving the target secure/sifted ratio at
  the target QBER.
"""

import argparse
import sys
from pathlib import Path

from scipy.optimize import brentq

from wdmqkd.config import load_config
from wdmqkd.core import SystemOperatingPoint, binary_entropy
from wdmqkd.environment import EnvironmentState, fiber_transmittance
from wdmqkd.optics import ChannelOptics, expected_epoch_stats

ROOT = Path(__file__).resolve().parents[1]


def nominal_sifted_rate(cfg, ch, t_rx: float) -> float:
    optics = ChannelOptics(ch.source, ch.interferometer, ch.detector,
                           fiber_transmittance(cfg.fiber), t_rx, ch.phase_offset_rad)
    probs = optics.probabilities(SystemOperatingPoint(), EnvironmentState())
    return expected_epoch_stats(probs, 1.0, ch.channel).sifted_rate_bps


def solve_t_rx(cfg, ch, target_bps: float) -> float:
    return brentq(lambda t: nominal_sifted_rate(cfg, ch, t) - target_bps, 1e-6, 1.0,
                  xtol=1e-12)


def solve_kappa(secure_bps: float, sifted_bps: float, qber: float, f: float) -> float:
    h = binary_entropy(qber)
    return (secure_bps / sifted_bps) / (1.0 - f * h - h)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "paper_2ch.cfg"))
    p.add_argument("--sifted-kbps", type=float, nargs="+", default=[315.3, 168.0],
                   help="target sifted rate per channel")
    p.add_argument("--secure-kbps", type=float, default=151.5)
    p.add_argument("--qber", type=float, default=0.0161)
    args = p.parse_args(argv)

    cfg = load_config(args.config)
    if len(args.sifted_kbps) != len(cfg.channels):
        p.error(f"need {len(cfg.channels)} sifted targets")
    for ch, target in zip(cfg.channels, args.sifted_kbps):
        t = solve_t_rx(cfg, ch, target * 1e3)
        print(f"channel {ch.index} ({ch.wavelength_nm} nm): t_rx = {t:.5f} "
              f"(configured {ch.t_rx:.5f})")
    kappa = solve_kappa(args.secure_kbps, args.sifted_kbps[0], args.qber,
                        cfg.distill.rate.ec_inefficiency_f)
    print(f"kappa = {kappa:.4f} (configured {cfg.distill.rate.kappa:.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
