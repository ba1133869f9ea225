"""Noise-free channel used as the stabilizer oracle."""

from dataclasses import dataclass, field

import numpy as np

from wdmqkd.core import SystemOperatingPoint, WavelengthChannel, db_to_transmittance
from wdmqkd.environment import EnvironmentState
from wdmqkd.optics import (DetectorModel, InterferometerModel, SourceModel,
                           expected_epoch_stats, outcome_probabilities)


@dataclass
class ExpectedChannel:
    """Returns expected-value EpochStats for a frozen environment."""

    env: EnvironmentState = field(default_factory=EnvironmentState)
    phase_offset: float = 0.0
    t_rx: float = 0.1474
    calls: int = 0

    def probs(self, op: SystemOperatingPoint):
        return outcome_probabilities(SourceModel(), InterferometerModel(), DetectorModel(),
                                     db_to_transmittance(12.6), op, self.env, self.t_rx,
                                     self.phase_offset)

    def measure(self, op: SystemOperatingPoint):
        self.calls += 1
        return expected_epoch_stats(self.probs(op), 1.0, WavelengthChannel(0, 1547.72))


def scan_optimum(channel: ExpectedChannel, pid, step, bounds, objective_max: bool,
                 base: SystemOperatingPoint = SystemOperatingPoint()) -> float:
    """Exhaustive grid scan of one parameter; returns the best grid value."""
    lo, hi = bounds
    grid = np.arange(np.ceil(lo / step), np.floor(hi / step) + 1) * step
    best_v, best_s = None, None
    for v in grid:
        stats = channel.measure(base.with_value(pid, float(v), step, bounds))
        s = stats.sifted_rate_bps if objective_max else -stats.qber
        if best_s is None or s > best_s:
            best_v, best_s = float(v), s
    return best_v
