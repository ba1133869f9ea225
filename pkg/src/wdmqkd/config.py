"""Scenario configuration: INI-style ``key = value`` sections.

See ``configs/paper_2ch.cfg`` for an annotated example listing every key
and its default. Validation collects every violated constraint before
raising, so one run of ``load_config`` reports all problems at once.
"""

from __future__ import annotations

import configparser
import dataclasses
import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import (DEFAULT_BOUNDS, DEFAULT_STEPS, MAX_CHANNELS, ParamId, SystemOperatingPoint,
                   WavelengthChannel, nearest_grid_wavelength, on_grid)
from .distill import DistillConfig, RateFormulaConfig, RateKind
from .environment import (ENV_FIELDS, DriftProcess, EnvironmentProcesses, FiberModel,
                          default_processes)
from .optics import MODES, RATE_LEVEL, DetectorModel, InterferometerModel, SourceModel
from .stabilizer import DEFAULT_OBJECTIVES, Objective, TunableParameter

DESK_DURATION_S = 7200.0
DAY_S = 86_400.0


class ConfigParseError(ValueError):
    pass


class ConfigValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid scenario config:\n  " + "\n  ".join(errors))


@dataclass(frozen=True)
class ChannelConfig:
    index: int
    wavelength_nm: float
    t_rx: float = 1.0
    phase_offset_rad: float = 0.0
    source: SourceModel = field(default_factory=SourceModel)
    interferometer: InterferometerModel = field(default_factory=InterferometerModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    initial_op_point: SystemOperatingPoint = field(default_factory=SystemOperatingPoint)

    @property
    def channel(self) -> WavelengthChannel:
        return WavelengthChannel(self.index, self.wavelength_nm)


@dataclass(frozen=True)
class StabilizerConfig:
    enabled: bool = True
    control_period_s: float = 10.0
    parameters: tuple[TunableParameter, ...] = ()


@dataclass(frozen=True)
class DistillSettings:
    rate: RateFormulaConfig = field(default_factory=RateFormulaConfig)
    pipeline: DistillConfig = field(default_factory=DistillConfig)
    period_s: float = 1800.0
    max_attempts: int = 3


@dataclass(frozen=True)
class ScenarioConfig:
    channels: tuple[ChannelConfig, ...]
    fiber: FiberModel = field(default_factory=FiberModel)
    drift: EnvironmentProcesses | None = None
    stabilizer: StabilizerConfig = field(default_factory=StabilizerConfig)
    distill: DistillSettings = field(default_factory=DistillSettings)
    duration_s: float = DESK_DURATION_S
    full_duration_s: float = 30 * DAY_S
    epoch_s: float = 1.0
    mode: str = RATE_LEVEL
    seed: int = 0
    start_time_s: float = 0.0
    checkpoint_period_s: float = 3600.0
    pulse_mc_cap: int = 100_000_000
    output_dir: str = "runs/out"

    @property
    def n_epochs(self) -> int:
        # whole epochs only; the tolerance absorbs float division error
        return int(math.floor(self.duration_s / self.epoch_s + 1e-9))

    def digest(self) -> str:
        payload = to_plain(self)
        payload.pop("output_dir", None)
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    return obj


# -- parsing helpers ----------------------------------------------------------

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _pair(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError(f"expected 'min, max', got {text!r}")
    return _float(parts[0]), _float(parts[1])


def _field_types(cls) -> dict:
    hints = {"float": _float, "int": int, "bool": _bool, "str": str}
    out = {}
    for f in dataclasses.fields(cls):
        t = f.type if isinstance(f.type, str) else f.type.__name__
        t = t.split("|")[0].strip()
        if t in hints:
            out[f.name] = hints[t]
    return out


class _Reader:
    """Typed access to a ConfigParser that records every problem found."""

    def __init__(self, parser: configparser.ConfigParser):
        self.parser = parser
        self.errors: list[str] = []
        self.used: set[tuple[str, str]] = set()

    def get(self, section: str, key: str, conv, default):
        if not self.parser.has_option(section, key):
            return default
        self.used.add((section, key))
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.errors.append(f"[{section}] {key}: {exc}")
            return default

    def model(self, cls, section: str, base=None, prefix: str = "", exclude=()):
        """Build ``cls`` from keys ``prefix + field`` of ``section``."""
        base = base if base is not None else cls()
        updates = {}
        for name, conv in _field_types(cls).items():
            if name in exclude:
                continue
            value = self.get(section, prefix + name, conv, None)
            if value is not None:
                updates[name] = value
        try:
            return replace(base, **updates)
        except (TypeError, ValueError) as exc:
            self.errors.append(f"[{section}] {exc}")
            return base

    def unknown_keys(self):
        for section in self.parser.sections():
            for key in self.parser.options(section):
                if (section, key) not in self.used:
                    self.errors.append(f"[{section}] {key}: unknown key")


def _drift(reader: _Reader, start_time_s: float, daylight: tuple[float, float],
           boost: float) -> EnvironmentProcesses:
    base = default_processes(boost, start_time_s)
    procs = {}
    for name in ENV_FIELDS:
        section = f"drift.{name}"
        proc = getattr(base, name)
        updated = reader.model(DriftProcess, section, proc, exclude=("ou_state", "sim_time_s"))
        # a configured mean moves the initial OU state with it
        procs[name] = replace(updated, ou_state=updated.mean, sim_time_s=start_time_s)
    return EnvironmentProcesses(**procs, polarization_daylight_boost=boost,
                                daylight_start_s=daylight[0], daylight_end_s=daylight[1])


def _stabilizer(reader: _Reader) -> StabilizerConfig:
    s = "stabilizer"
    enabled = reader.get(s, "enabled", _bool, True)
    period = reader.get(s, "control_period_s", _float, 10.0)
    dwell = reader.get(s, "dwell_epochs", int, 3)
    order_text = reader.get(s, "order", str, ", ".join(p.value for p in ParamId))
    order = []
    for token in (t.strip() for t in order_text.split(",") if t.strip()):
        try:
            order.append(ParamId(token))
        except ValueError:
            reader.errors.append(f"[{s}] order: unknown parameter {token!r}")
    params = []
    for pid in order:
        step = reader.get(s, f"step.{pid.value}", _float, DEFAULT_STEPS[pid])
        bounds = reader.get(s, f"bounds.{pid.value}", _pair, DEFAULT_BOUNDS[pid])
        objective = reader.get(s, f"objective.{pid.value}", Objective, DEFAULT_OBJECTIVES[pid])
        try:
            params.append(TunableParameter(pid, step, bounds, objective, dwell))
        except ValueError as exc:
            reader.errors.append(f"[{s}] {exc}")
    if period <= 0:
        reader.errors.append(f"[{s}] control_period_s: must be > 0")
    if enabled and not params:
        reader.errors.append(f"[{s}] order: an enabled stabilizer needs at least one parameter")
    return StabilizerConfig(enabled, period, tuple(params))


def _distill(reader: _Reader) -> DistillSettings:
    s = "distill"
    kind = reader.get(s, "rate_formula", RateKind, RateKind.CALIBRATED)
    rate_kwargs = dict(
        kind=kind,
        ec_inefficiency_f=reader.get(s, "ec_inefficiency_f", _float, 1.1),
        kappa=reader.get(s, "kappa", _float, RateFormulaConfig.kappa),
        mu=reader.get(s, "mu", _float, 0.5),
        detection_prob_per_pulse=reader.get(s, "detection_prob_per_pulse", _float, None),
    )
    try:
        rate = RateFormulaConfig(**rate_kwargs)
    except ValueError as exc:
        reader.errors.append(f"[{s}] {exc}")
        rate = RateFormulaConfig()
    pipeline = reader.model(DistillConfig, s)
    if not 0 < pipeline.sample_fraction < 1:
        reader.errors.append(f"[{s}] sample_fraction: must lie in (0, 1)")
    if pipeline.block_size < 1000:
        reader.errors.append(f"[{s}] block_size: must be >= 1000")
    period = reader.get(s, "period_s", _float, 1800.0)
    if period <= 0:
        reader.errors.append(f"[{s}] period_s: must be > 0")
    attempts = reader.get(s, "max_attempts", int, 3)
    return DistillSettings(rate, pipeline, period, max(1, attempts))


def _channels(reader: _Reader, source, interferometer, detector) -> list[ChannelConfig]:
    sections = sorted((s for s in reader.parser.sections() if s.startswith("channel.")),
                      key=lambda s: (len(s), s))
    if not sections:
        reader.errors.append("no [channel.N] sections: at least one channel is required")
    if len(sections) > MAX_CHANNELS:
        reader.errors.append(f"{len(sections)} channels configured; at most {MAX_CHANNELS} allowed")
    channels = []
    seen_wl = {}
    for section in sections:
        try:
            index = int(section.split(".", 1)[1])
        except ValueError:
            reader.errors.append(f"[{section}] section name must be channel.<index>")
            continue
        if not 0 <= index < MAX_CHANNELS:
            reader.errors.append(f"[{section}] index must lie in 0..{MAX_CHANNELS - 1}")
        wl = reader.get(section, "wavelength_nm", _float, None)
        if wl is None:
            reader.errors.append(f"[{section}] wavelength_nm: required")
            continue
        grid = nearest_grid_wavelength(wl)
        if grid is None:
            reader.errors.append(f"[{section}] wavelength_nm: {wl} is not on the 100 GHz grid "
                                 "between 1545.32 and 1550.92 nm")
        elif grid in seen_wl:
            reader.errors.append(f"[{section}] wavelength_nm: {wl} duplicates [{seen_wl[grid]}]")
        else:
            seen_wl[grid] = section
        t_rx = reader.get(section, "t_rx", _float, 1.0)
        if not 0 < t_rx <= 1:
            reader.errors.append(f"[{section}] t_rx: must lie in (0, 1], got {t_rx}")
        phase = reader.get(section, "phase_offset_rad", _float, 0.0)
        op = SystemOperatingPoint(**{
            p.value: reader.get(section, f"initial.{p.value}", _float, 0.0) for p in ParamId})
        channels.append(ChannelConfig(
            index, wl, t_rx, phase,
            reader.model(SourceModel, section, source, "source."),
            reader.model(InterferometerModel, section, interferometer, "interferometer."),
            reader.model(DetectorModel, section, detector, "detector."),
            op,
        ))
    indices = [c.index for c in channels]
    if len(set(indices)) != len(indices):
        reader.errors.append("channel indices must be unique")
    return channels


def parse_config(text: str, source_name: str = "<string>") -> ScenarioConfig:
    if not text.strip():
        raise ConfigParseError(f"{source_name}: empty config file")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source_name)
    except configparser.Error as exc:
        raise ConfigParseError(f"{source_name}: {exc}") from exc
    if not parser.sections():
        raise ConfigParseError(f"{source_name}: no sections found")

    r = _Reader(parser)
    sc = "scenario"
    start = r.get(sc, "start_time_of_day_s", _float, 0.0)
    fiber = r.model(FiberModel, "fiber")
    daylight = (r.get("fiber", "daylight_start_h", _float, 6.0) * 3600.0,
                r.get("fiber", "daylight_end_h", _float, 18.0) * 3600.0)
    drift = _drift(r, start, daylight, fiber.polarization_daylight_boost)
    source = r.model(SourceModel, "source")
    interferometer = r.model(InterferometerModel, "interferometer")
    detector = r.model(DetectorModel, "detector")
    channels = _channels(r, source, interferometer, detector)
    stabilizer = _stabilizer(r)
    distill = _distill(r)

    cfg = ScenarioConfig(
        channels=tuple(channels),
        fiber=fiber,
        drift=drift,
        stabilizer=stabilizer,
        distill=distill,
        duration_s=r.get(sc, "desk_duration_s", _float, DESK_DURATION_S),
        full_duration_s=r.get(sc, "duration_s", _float, 30 * DAY_S),
        epoch_s=r.get(sc, "epoch_s", _float, 1.0),
        mode=r.get(sc, "mode", str, RATE_LEVEL),
        seed=r.get(sc, "seed", int, 0),
        start_time_s=start,
        checkpoint_period_s=r.get(sc, "checkpoint_period_s", _float, 3600.0),
        pulse_mc_cap=r.get(sc, "pulse_mc_cap", int, 100_000_000),
        output_dir=r.get(sc, "output_dir", str, "runs/out"),
    )
    r.unknown_keys()
    r.errors.extend(validate(cfg))
    if r.errors:
        raise ConfigValidationError(r.errors)
    return cfg


def validate(cfg: ScenarioConfig) -> list[str]:
    errors = []
    if not 1 <= len(cfg.channels) <= MAX_CHANNELS:
        errors.append(f"channels: need 1..{MAX_CHANNELS}, got {len(cfg.channels)}")
    if not cfg.epoch_s > 0:
        errors.append("[scenario] epoch_s: must be > 0")
    for name, value in (("desk_duration_s", cfg.duration_s), ("duration_s", cfg.full_duration_s)):
        if cfg.epoch_s > 0 and not value >= cfg.epoch_s:
            errors.append(f"[scenario] {name}: must be >= epoch_s ({cfg.epoch_s})")
    if cfg.mode not in MODES:
        errors.append(f"[scenario] mode: must be one of {', '.join(MODES)}")
    if not cfg.checkpoint_period_s >= cfg.epoch_s:
        errors.append("[scenario] checkpoint_period_s: must be >= epoch_s")
    for ch in cfg.channels:
        if ch.source.mean_photon_number > 1:
            errors.append(f"[channel.{ch.index}] mean_photon_number must be <= 1")
        for p in cfg.stabilizer.parameters:
            v = ch.initial_op_point.get(p.id)
            if not p.bounds[0] <= v <= p.bounds[1]:
                errors.append(f"[channel.{ch.index}] initial.{p.id.value}: {v} outside bounds {p.bounds}")
            elif not on_grid(v, p.step):
                errors.append(f"[channel.{ch.index}] initial.{p.id.value}: {v} is not a multiple of {p.step}")
    return errors


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


def with_overrides(cfg: ScenarioConfig, *, seed=None, duration_s=None, full=False, mode=None,
                   stabilizer=None, output_dir=None) -> ScenarioConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if full:
        changes["duration_s"] = cfg.full_duration_s
    if duration_s is not None:
        changes["duration_s"] = float(duration_s)
    if mode is not None:
        changes["mode"] = mode
    if stabilizer is not None:
        changes["stabilizer"] = replace(cfg.stabilizer, enabled=bool(stabilizer))
    if output_dir is not None:
        changes["output_dir"] = str(output_dir)
    new = replace(cfg, **changes)
    errors = validate(new)
    if errors:
        raise ConfigValidationError(errors)
    return new
