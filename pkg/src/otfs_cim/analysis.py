"""Closed-form throughput, spectral-efficiency and energy-saving metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

from .config import SYSTEMS, FrameConfig, spectral_efficiency, timing

METRIC_COLUMNS = ("system", "snr_db", "ber", "throughput_bps", "eta_bpcu")


@dataclass(frozen=True)
class MetricPoint:
    snr_db: float
    value: float
    system: str

    def __post_init__(self):
        # snr_db = +inf marks a noiseless run
        if math.isnan(self.snr_db) or not math.isfinite(self.value):
            raise ValueError(f"non-finite metric point {self}")
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}")


def throughput(ber: float, T_s: float, eta: float) -> float:
    """Correctly delivered bits per second, (1 - BER) * eta / T_s."""
    if not 0.0 <= ber <= 1.0:
        raise ValueError(f"BER {ber} outside [0, 1]")
    if not T_s > 0:
        raise ValueError("symbol duration must be positive")
    return (1.0 - ber) * eta / T_s


def energy_saving(eta_benchmark: float, eta_cim: float) -> float:
    """Percentage energy saved per eta_cim bits relative to a benchmark."""
    if not eta_benchmark > 0:
        raise ValueError("benchmark efficiency must be positive")
    if eta_cim < eta_benchmark:
        raise ValueError(f"eta_cim={eta_cim} < eta_benchmark={eta_benchmark}: negative saving")
    return (1.0 - eta_benchmark / eta_cim) * 100.0


def energy_savings(cfg: FrameConfig) -> dict:
    """Saving of OTFS-CIM over each benchmark for one shared config."""
    eta_cim = spectral_efficiency("otfs-cim", cfg)
    return {
        "otfs": energy_saving(spectral_efficiency("otfs", cfg), eta_cim),
        "otfs-sm": energy_saving(spectral_efficiency("otfs-sm", cfg), eta_cim),
    }


def spectral_efficiency_curve(cfg: FrameConfig, sizes) -> list[dict]:
    """bpcu of all three systems as the square grid size N = M grows."""
    rows = []
    for n in sizes:
        c = replace(cfg, N=n, M=n)
        rows.append({"N": n, "M": n, **{s: spectral_efficiency(s, c) for s in SYSTEMS}})
    return rows


def throughput_points(system: str, cfg: FrameConfig, snr_ber) -> list[MetricPoint]:
    """Throughput (bit/s) for ``(snr_db, ber)`` pairs."""
    T_s = timing(cfg).T_s
    eta = spectral_efficiency(system, cfg)
    return [MetricPoint(snr, throughput(ber, T_s, eta), system) for snr, ber in snr_ber]


def metric_table_csv(rows) -> str:
    """CSV text with columns system, snr_db, ber, throughput_bps, eta_bpcu."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in rows:
        writer.writerow([row[c] for c in METRIC_COLUMNS])
    return buf.getvalue()
