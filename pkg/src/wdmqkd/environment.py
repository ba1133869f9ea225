"""Stochastic environmental drift acting on one link.

Every drifting quantity is an Ornstein-Uhlenbeck process with an optional
diurnal sinusoid superimposed on it. The sinusoid is added to the reported
value only, so it is not low-pass filtered by the mean reversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .core import db_to_transmittance

SECONDS_PER_DAY = 86_400.0


@dataclass(frozen=True, slots=True)
class DriftProcess:
    mean: float = 0.0
    relaxation_time_s: float = 3600.0
    stationary_sigma: float = 0.0
    diurnal_amplitude: float = 0.0
    diurnal_phase_s: float = 0.0
    ou_state: float = 0.0  # mean-reverting component, excludes the sinusoid
    sim_time_s: float = 0.0

    def __post_init__(self):
        if not self.relaxation_time_s > 0:
            raise ValueError("relaxation_time_s must be > 0")
        if self.stationary_sigma < 0 or self.diurnal_amplitude < 0:
            raise ValueError("sigma and diurnal amplitude must be >= 0")

    @property
    def current_value(self) -> float:
        return self.ou_state + diurnal_term(self, self.sim_time_s)

    @classmethod
    def at_rest(cls, **kwargs) -> "DriftProcess":
        """A process whose OU component starts at its mean."""
        proc = cls(**kwargs)
        return replace(proc, ou_state=proc.mean)


def diurnal_term(process: DriftProcess, t: float) -> float:
    if process.diurnal_amplitude == 0.0:
        return 0.0
    return process.diurnal_amplitude * math.sin(
        2.0 * math.pi * (t + process.diurnal_phase_s) / SECONDS_PER_DAY
    )


def drift_step(process: DriftProcess, dt_s: float, noise: float,
               sigma_scale: float = 1.0) -> DriftProcess:
    """Advance one process by ``dt_s`` using the exact OU transition.

    ``noise`` is a standard normal draw; ``sigma_scale`` multiplies the
    stationary sigma for this step only.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    a = math.exp(-dt_s / process.relaxation_time_s)
    sigma = process.stationary_sigma * sigma_scale
    ou = process.mean + (process.ou_state - process.mean) * a
    if sigma:
        ou += sigma * math.sqrt(1.0 - a * a) * noise
    return replace(process, ou_state=ou, sim_time_s=process.sim_time_s + dt_s)


@dataclass(frozen=True, slots=True)
class EnvironmentState:
    fiber_delay_ps: float = 0.0
    polarization_angle_rad: float = 0.0
    amzi_temp_error_K: float = 0.0
    bias_drift: float = 0.0
    sim_time_s: float = 0.0


ENV_FIELDS = ("fiber_delay_ps", "polarization_angle_rad", "amzi_temp_error_K", "bias_drift")


@dataclass(frozen=True)
class EnvironmentProcesses:
    """One drift process per environment field plus the daylight window."""

    fiber_delay_ps: DriftProcess
    polarization_angle_rad: DriftProcess
    amzi_temp_error_K: DriftProcess
    bias_drift: DriftProcess
    polarization_daylight_boost: float = 1.0
    daylight_start_s: float = 6 * 3600.0
    daylight_end_s: float = 18 * 3600.0

    def is_daylight(self, t: float) -> bool:
        tod = t % SECONDS_PER_DAY
        return self.daylight_start_s <= tod < self.daylight_end_s

    def state(self) -> EnvironmentState:
        return EnvironmentState(
            **{name: getattr(self, name).current_value for name in ENV_FIELDS},
            sim_time_s=self.fiber_delay_ps.sim_time_s,
        )


def default_processes(polarization_daylight_boost: float = 3.0,
                      start_time_s: float = 0.0) -> EnvironmentProcesses:
    """Default drift calibration.

    Fiber delay swings 50 ps peak-to-peak over a day; the AMZI temperature
    error has a 0.02 K stationary spread.
    """
    def proc(**kw):
        return DriftProcess.at_rest(sim_time_s=start_time_s, **kw)

    return EnvironmentProcesses(
        fiber_delay_ps=proc(relaxation_time_s=1800.0, stationary_sigma=2.0,
                            diurnal_amplitude=25.0),
        polarization_angle_rad=proc(relaxation_time_s=600.0, stationary_sigma=0.3),
        amzi_temp_error_K=proc(relaxation_time_s=3600.0, stationary_sigma=0.02),
        bias_drift=proc(relaxation_time_s=7200.0, stationary_sigma=0.2),
        polarization_daylight_boost=polarization_daylight_boost,
    )


def advance_environment(env: EnvironmentState, processes: EnvironmentProcesses,
                        dt_s: float, rng: np.random.Generator
                        ) -> tuple[EnvironmentState, EnvironmentProcesses]:
    """Step all four processes; return the new state and the new processes.

    Exactly four normal draws are consumed per call regardless of
    configuration, so trajectories stay aligned across config toggles.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    z = rng.standard_normal(4)
    boost = (processes.polarization_daylight_boost
             if processes.is_daylight(env.sim_time_s) else 1.0)
    stepped = {}
    for k, name in enumerate(ENV_FIELDS):
        scale = boost if name == "polarization_angle_rad" else 1.0
        stepped[name] = drift_step(getattr(processes, name), dt_s, float(z[k]), scale)
    processes = replace(processes, **stepped)
    new_env = EnvironmentState(
        **{name: stepped[name].current_value for name in ENV_FIELDS},
        sim_time_s=env.sim_time_s + dt_s,
    )
    return new_env, processes


@dataclass(frozen=True)
class FiberModel:
    length_km: float = 22.0
    loss_db: float = 12.6
    polarization_daylight_boost: float = 3.0

    def __post_init__(self):
        if self.loss_db < 0:
            raise ValueError("fiber loss_db must be >= 0")
        if self.polarization_daylight_boost < 1:
            raise ValueError("polarization_daylight_boost must be >= 1")


def fiber_transmittance(fiber: FiberModel) -> float:
    return db_to_transmittance(fiber.loss_db)


def environment_trajectory(processes: EnvironmentProcesses, n_steps: int, dt_s: float,
                           rng: np.random.Generator
                           ) -> tuple[dict[str, np.ndarray], EnvironmentProcesses]:
    """Vectorized equivalent of ``n_steps`` calls to :func:`advance_environment`.

    Consumes the same normal draws in the same order; values agree with the
    step-by-step path to floating-point rounding. Returns the per-step field
    values (after each step), the step end times and the advanced processes.
    """
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    t0 = processes.fiber_delay_ps.sim_time_s
    z = rng.standard_normal((n_steps, 4))
    starts = t0 + dt_s * np.arange(n_steps)
    ends = starts + dt_s
    tod = np.mod(starts, SECONDS_PER_DAY)
    daylight = (tod >= processes.daylight_start_s) & (tod < processes.daylight_end_s)
    out, stepped = {}, {}
    for k, name in enumerate(ENV_FIELDS):
        proc = getattr(processes, name)
        a = math.exp(-dt_s / proc.relaxation_time_s)
        sigma = np.full(n_steps, proc.stationary_sigma)
        if name == "polarization_angle_rad":
            sigma = np.where(daylight, sigma * processes.polarization_daylight_boost, sigma)
        drive = sigma * math.sqrt(1.0 - a * a) * z[:, k]
        # x[i] = a * x[i-1] + drive[i] on the deviation from the mean
        dev, _ = lfilter([1.0], [1.0, -a], drive, zi=[a * (proc.ou_state - proc.mean)])
        ou = proc.mean + dev
        if proc.diurnal_amplitude:
            values = ou + proc.diurnal_amplitude * np.sin(
                2.0 * math.pi * (ends + proc.diurnal_phase_s) / SECONDS_PER_DAY)
        else:
            values = ou
        out[name] = values
        stepped[name] = replace(proc, ou_state=float(ou[-1]),
                                sim_time_s=t0 + n_steps * dt_s)
    out["sim_time_s"] = ends
    return out, replace(processes, **stepped)
