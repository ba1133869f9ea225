"""Time-stepped WDM scenario loop.

Each wavelength channel owns its environment realization, controller and
RNG streams (derived from the master seed by channel index), so channels
advance independently and may run in separate worker processes. Channels
are advanced one checkpoint chunk at a time; the chunk outputs are merged
in (time, channel) order, which makes the result independent of the worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ChannelConfig, ScenarioConfig
from .core import SystemOperatingPoint, WavelengthChannel
from .distill import (BlockTooSmallError, ReconciliationError, SiftedBlock, distill_block,
                      expected_yield_array)
from .environment import (EnvironmentProcesses, EnvironmentState, default_processes,
                          environment_trajectory, fiber_transmittance)
from .optics import (PULSE_MC, ChannelOptics, rate_level_stats, simulate_epoch,
                     synthesize_streams)
from .stabilizer import Controller

ENV_STREAM, OPTICS_STREAM, DISTILL_STREAM = 0, 1, 2
HYPERGEOMETRIC_LIMIT = 1_000_000_000


def channel_rng(seed: int, channel_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(channel_index, stream)))


@dataclass
class ChannelTotals:
    epochs: int = 0
    gated_pulses: int = 0
    signal_clicks: int = 0
    dark_clicks: int = 0
    sifted_bits: int = 0
    sifted_errors: int = 0
    secure_bits: int = 0
    max_epoch_qber: float = 0.0


@dataclass(slots=True)
class TimeSeriesRecord:
    sim_time_s: float
    channel: int
    qber: float
    sifted_rate_bps: float
    secure_rate_bps: float
    op_point: SystemOperatingPoint
    fiber_delay_ps: float
    polarization_rad: float


@dataclass
class ChannelRunner:
    """All mutable simulation state for one wavelength channel."""

    cfg: ChannelConfig
    scenario: ScenarioConfig
    processes: EnvironmentProcesses
    op_point: SystemOperatingPoint
    controller: Controller | None
    rngs: tuple
    epoch: int = 0
    next_control_s: float = 0.0
    period_sifted: int = 0
    period_errors: int = 0
    period_bits: list = field(default_factory=list)
    last_distill_s: float = 0.0
    totals: ChannelTotals = field(default_factory=ChannelTotals)
    distill_seq: int = 0
    optics: ChannelOptics | None = None
    channel: WavelengthChannel | None = None

    @classmethod
    def create(cls, scenario: ScenarioConfig, ch: ChannelConfig) -> "ChannelRunner":
        procs = scenario.drift or default_processes(scenario.fiber.polarization_daylight_boost,
                                                    scenario.start_time_s)
        controller = None
        if scenario.stabilizer.enabled and scenario.stabilizer.parameters:
            controller = Controller(list(scenario.stabilizer.parameters))
        rngs = tuple(channel_rng(scenario.seed, ch.index, s)
                     for s in (ENV_STREAM, OPTICS_STREAM, DISTILL_STREAM))
        return cls(ch, scenario, procs, ch.initial_op_point, controller, rngs,
                   next_control_s=scenario.start_time_s,
                   last_distill_s=scenario.start_time_s,
                   optics=ChannelOptics(ch.source, ch.interferometer, ch.detector,
                                        fiber_transmittance(scenario.fiber), ch.t_rx,
                                        ch.phase_offset_rad),
                   channel=ch.channel)

    @property
    def sim_time_s(self) -> float:
        return self.scenario.start_time_s + self.epoch * self.scenario.epoch_s

    def step(self, env: EnvironmentState, records: list, events: list) -> None:
        """Simulate one epoch under the (already advanced) environment."""
        sc = self.scenario
        t0 = self.sim_time_s
        controller = self.controller

        in_cycle = False
        if controller is not None:
            if not controller.idle:
                in_cycle = True
            elif t0 + 1e-9 >= self.next_control_s:
                in_cycle = True
                self.next_control_s = t0 + sc.stabilizer.control_period_s
        applied = controller.applied_point(self.op_point) if in_cycle else self.op_point

        ch = self.cfg
        probs = self.optics.probabilities(applied, env)
        pulse_mc = sc.mode == PULSE_MC
        if pulse_mc:
            result = simulate_epoch(sc.mode, sc.epoch_s, probs, self.rngs[OPTICS_STREAM],
                                    channel=self.channel, epoch_index=self.epoch,
                                    pulse_mc_cap=sc.pulse_mc_cap)
            stats = result.stats
        else:
            stats = rate_level_stats(probs, sc.epoch_s, self.rngs[OPTICS_STREAM],
                                     self.channel, self.epoch)
        self.epoch += 1
        t1 = self.sim_time_s

        if in_cycle:
            self.op_point, decision = controller.observe(stats, self.op_point)
            if decision is not None:
                events.append({
                    "type": "stabilizer", "sim_time_s": t1, "channel": ch.index,
                    "parameter": decision.parameter.value,
                    "scores": list(decision.scores), "offset": decision.offset,
                    "old_value": decision.old_value, "new_value": decision.new_value,
                })

        tot = self.totals
        tot.epochs += 1
        tot.gated_pulses += stats.gated_pulses
        tot.signal_clicks += stats.signal_clicks
        tot.dark_clicks += stats.dark_clicks
        tot.sifted_bits += stats.sifted_bits
        tot.sifted_errors += stats.sifted_errors
        qber = stats.qber
        if qber > tot.max_epoch_qber:  # False for NaN
            tot.max_epoch_qber = qber
        self.period_sifted += stats.sifted_bits
        self.period_errors += stats.sifted_errors
        if pulse_mc:
            self._buffer_bits(result)

        # secure_rate_bps is filled in per chunk by fill_secure_rates
        records.append(TimeSeriesRecord(t1, ch.index, qber, stats.sifted_rate_bps,
                                        0.0, applied, env.fiber_delay_ps,
                                        env.polarization_angle_rad))
        if t1 - self.last_distill_s + 1e-9 >= sc.distill.period_s:
            self.distill(events, final=False)

    def _buffer_bits(self, result) -> None:
        have = sum(len(a) for a, _ in self.period_bits)
        room = self.scenario.distill.pipeline.block_size - have
        if room <= 0:
            return
        keep = result.alice_bases == result.bob_bases
        a, b = result.alice_bits[keep][:room], result.bob_bits[keep][:room]
        if len(a):
            self.period_bits.append((a, b))

    def _representative_block(self, rng) -> SiftedBlock:
        n_block = min(self.scenario.distill.pipeline.block_size, self.period_sifted)
        if self.period_bits:
            a = np.concatenate([x for x, _ in self.period_bits])
            b = np.concatenate([y for _, y in self.period_bits])
            return SiftedBlock(a, b, self.channel)
        if n_block >= self.period_sifted:
            errors = self.period_errors
        elif self.period_sifted < HYPERGEOMETRIC_LIMIT:
            errors = int(rng.hypergeometric(self.period_errors,
                                            self.period_sifted - self.period_errors, n_block))
        else:
            # numpy caps hypergeometric populations; at this size sampling
            # without replacement is binomial to within n_block / population
            errors = int(rng.binomial(n_block, self.period_errors / self.period_sifted))
        a, b, _, _ = synthesize_streams(n_block, n_block, errors, rng)
        return SiftedBlock(a, b, self.channel)

    def distill(self, events: list, final: bool) -> None:
        """Distill one representative block and credit its yield to the
        whole period's sifted bits."""
        if self.period_sifted == 0:
            self.last_distill_s = self.sim_time_s
            return
        sc = self.scenario
        rng = self.rngs[DISTILL_STREAM]
        attempts = []
        secure_bits, status, block_acc = 0, "too_small", None
        for attempt in range(sc.distill.max_attempts):
            block = self._representative_block(rng)
            try:
                key, acc = distill_block(block, sc.distill.rate, sc.distill.pipeline, rng)
            except BlockTooSmallError:
                if not final:
                    return  # keep accumulating into the next period
                break
            except ReconciliationError as exc:
                attempts.append(str(exc))
                status = "reconciliation_failed"
                self.period_bits = []
                continue
            block_acc = acc.to_dict()
            status = acc.status
            secure_bits = (len(key) * self.period_sifted) // acc.sifted_bits
            break
        self.totals.secure_bits += secure_bits
        events.append({
            "type": "distill", "sim_time_s": self.sim_time_s, "channel": self.cfg.index,
            "seq": self.distill_seq, "period_sifted_bits": self.period_sifted,
            "period_errors": self.period_errors, "secure_bits": secure_bits,
            "status": status, "failed_attempts": attempts, "block": block_acc,
        })
        self.distill_seq += 1
        self.period_sifted = self.period_errors = 0
        self.period_bits = []
        self.last_distill_s = self.sim_time_s


def fill_secure_rates(records: list, scenario: ScenarioConfig) -> None:
    """Set each record's secure rate to sifted rate x expected yield."""
    if not records:
        return
    qber = np.fromiter((r.qber for r in records), float, len(records))
    yields = expected_yield_array(scenario.distill.rate, scenario.distill.pipeline, qber)
    for rec, y in zip(records, yields.tolist()):
        rec.secure_rate_bps = rec.sifted_rate_bps * y


def advance_runner(runner: ChannelRunner, n_epochs: int, final: bool):
    records, events = [], []
    traj, runner.processes = environment_trajectory(
        runner.processes, n_epochs, runner.scenario.epoch_s, runner.rngs[ENV_STREAM])
    columns = zip(traj["fiber_delay_ps"].tolist(), traj["polarization_angle_rad"].tolist(),
                  traj["amzi_temp_error_K"].tolist(), traj["bias_drift"].tolist(),
                  traj["sim_time_s"].tolist())
    for values in columns:
        runner.step(EnvironmentState(*values), records, events)
    fill_secure_rates(records, runner.scenario)
    if final:
        runner.distill(events, final=True)
    return runner, records, events


def advance_all(runners: list[ChannelRunner], n_epochs: int, final: bool,
                workers: int = 1, pool: ProcessPoolExecutor | None = None):
    """Advance every channel by ``n_epochs``; merge outputs deterministically."""
    if pool is not None and workers > 1 and len(runners) > 1:
        futures = [pool.submit(advance_runner, r, n_epochs, final) for r in runners]
        results = [f.result() for f in futures]
    else:
        results = [advance_runner(r, n_epochs, final) for r in runners]
    new_runners = [r for r, _, _ in results]
    records = sorted((rec for _, recs, _ in results for rec in recs),
                     key=lambda r: (r.sim_time_s, r.channel))
    events = sorted((ev for _, _, evs in results for ev in evs),
                    key=lambda e: (e["sim_time_s"], e["channel"], e["type"]))
    return new_runners, records, events
