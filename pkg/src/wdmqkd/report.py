"""Run summaries and the channel-loss normalized secure-key metric."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .core import db_to_transmittance

SECONDS_PER_DAY = 86_400.0


def total_key_bits(rate_bps: float, duration_s: float) -> float:
    return rate_bps * duration_s


def normalized_secure_bits(total_secure_bits: float, channel_loss_db: float) -> float:
    """Secure bits that would have been delivered over a lossless channel."""
    return total_secure_bits / db_to_transmittance(channel_loss_db)


@dataclass(frozen=True)
class ChannelSummary:
    channel: int
    wavelength_nm: float
    epochs: int
    sifted_bits_total: int
    sifted_errors_total: int
    secure_bits_total: int
    qber_avg: float
    max_epoch_qber: float
    sifted_bps_avg: float
    secure_bps_avg: float


@dataclass(frozen=True)
class RunReport:
    per_channel: list[ChannelSummary]
    totals: dict
    channel_loss_db: float
    normalized_secure_bits: float
    uninterrupted_span_s: float
    config_digest: str
    sim_duration_s: float
    completed: bool = True
    wall_clock_s: float = field(default=0.0, compare=False)

    def summary_dict(self) -> dict:
        """The deterministic summary (wall-clock time is kept out of it)."""
        return {
            "per_channel": [asdict(c) for c in self.per_channel],
            "totals": dict(self.totals),
            "channel_loss_db": self.channel_loss_db,
            "normalized_secure_bits": self.normalized_secure_bits,
            "uninterrupted_span_s": self.uninterrupted_span_s,
            "config_digest": self.config_digest,
            "sim_duration_s": self.sim_duration_s,
            "completed": self.completed,
        }

    @classmethod
    def from_summary_dict(cls, d: dict, wall_clock_s: float = 0.0) -> "RunReport":
        return cls([ChannelSummary(**c) for c in d["per_channel"]], dict(d["totals"]),
                   d["channel_loss_db"], d["normalized_secure_bits"],
                   d["uninterrupted_span_s"], d["config_digest"], d["sim_duration_s"],
                   d.get("completed", True), wall_clock_s)


def _ratio(num: float, den: float) -> float:
    return num / den if den else math.nan


def summarize(channel_totals: dict, wavelengths: dict, sim_duration_s: float,
              channel_loss_db: float, uninterrupted_span_s: float, config_digest: str,
              completed: bool = True, wall_clock_s: float = 0.0) -> RunReport:
    """Aggregate per-channel totals into a report.

    ``channel_totals`` maps channel index to an object with ``epochs``,
    ``sifted_bits``, ``sifted_errors``, ``secure_bits`` and
    ``max_epoch_qber`` attributes. Rates are averages over the simulated
    duration; QBERs are sifted-bit weighted.
    """
    per = []
    for idx in sorted(channel_totals):
        t = channel_totals[idx]
        per.append(ChannelSummary(
            channel=idx,
            wavelength_nm=wavelengths[idx],
            epochs=t.epochs,
            sifted_bits_total=t.sifted_bits,
            sifted_errors_total=t.sifted_errors,
            secure_bits_total=t.secure_bits,
            qber_avg=_ratio(t.sifted_errors, t.sifted_bits),
            max_epoch_qber=t.max_epoch_qber,
            sifted_bps_avg=_ratio(t.sifted_bits, sim_duration_s),
            secure_bps_avg=_ratio(t.secure_bits, sim_duration_s),
        ))
    sifted = sum(c.sifted_bits_total for c in per)
    secure = sum(c.secure_bits_total for c in per)
    totals = {
        "qber_avg": _ratio(sum(c.sifted_errors_total for c in per), sifted),
        "sifted_bps_avg": sum(c.sifted_bps_avg for c in per),
        "secure_bps_avg": sum(c.secure_bps_avg for c in per),
        "secure_bits_total": secure,
        "sifted_bits_total": sifted,
    }
    return RunReport(per, totals, channel_loss_db,
                     normalized_secure_bits(secure, channel_loss_db),
                     uninterrupted_span_s, config_digest, sim_duration_s, completed,
                     wall_clock_s)


def format_report(report: RunReport) -> str:
    lines = [f"{'channel':>8} {'lambda[nm]':>11} {'QBER[%]':>8} {'sifted[kbps]':>13} "
             f"{'secure[kbps]':>13} {'secure bits':>14}"]
    for c in report.per_channel:
        lines.append(f"{c.channel:>8} {c.wavelength_nm:>11.2f} {100 * c.qber_avg:>8.2f} "
                     f"{c.sifted_bps_avg / 1e3:>13.1f} {c.secure_bps_avg / 1e3:>13.1f} "
                     f"{c.secure_bits_total:>14d}")
    t = report.totals
    lines.append(f"{'total':>8} {'':>11} {100 * t['qber_avg']:>8.2f} "
                 f"{t['sifted_bps_avg'] / 1e3:>13.1f} {t['secure_bps_avg'] / 1e3:>13.1f} "
                 f"{t['secure_bits_total']:>14d}")
    lines.append(f"simulated {report.sim_duration_s / 3600:.2f} h, "
                 f"longest uninterrupted span {report.uninterrupted_span_s / 3600:.2f} h, "
                 f"channel loss {report.channel_loss_db} dB")
    lines.append(f"channel-loss normalized secure key: {report.normalized_secure_bits:.4g} bits")
    return "\n".join(lines)
