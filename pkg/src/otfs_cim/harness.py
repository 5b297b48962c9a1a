"""Monte Carlo BER engine.

Frames are simulated in fixed-size chunks.  Every frame draws its
channel and its data/noise from generators seeded by
``(master seed, frame index, stream)``, so a chunk's error count
depends only on the seed and the frame range.  Chunks are accumulated
in index order and the stopping rule is checked after each chunk, which
makes results identical for any worker count.  Channels and noise are
shared across SNR points (common random numbers).
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .analysis import metric_table_csv, throughput
from .benchmarks import otfs_sm_transceive, otfs_transceive, sm_payload_bits
from .channel import (CHANNEL_STREAM, DATA_STREAM, PathSet, apply_channel, draw_unit_noise,
                      frame_rng, noise_variance, realize, sample_paths)
from .config import SYSTEMS, FrameConfig, bits_per_frame, spectral_efficiency, timing, validate
from .detector import detect_frame
from .mapping import map_bits
from .spreading import generate_wh, spread_frame
from .transforms import chips_to_time

log = logging.getLogger(__name__)

CSV_COLUMNS = ("system", "snr_db", "frames", "bits", "errors", "ber", "ci95", "throughput_bps")
DEFAULT_CHUNK = 250


@dataclass(frozen=True)
class SweepSpec:
    system: str
    cfg: FrameConfig
    snr_db_list: tuple
    max_frames: int = 10_000
    min_bit_errors: int = 200
    seed: int = 0
    chunk_frames: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown system {self.system!r}; expected one of {SYSTEMS}")
        snrs = tuple(float(s) for s in self.snr_db_list)
        if not snrs:
            raise ValueError("empty SNR list")
        if any(b <= a for a, b in zip(snrs, snrs[1:])):
            raise ValueError(f"SNR list must be strictly increasing: {snrs}")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.chunk_frames < 1:
            raise ValueError("chunk_frames must be >= 1")
        object.__setattr__(self, "snr_db_list", snrs)
        validate(self.cfg, allow_cross=True)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snr_db_list"] = list(self.snr_db_list)
        return d


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    frames_run: int
    bits_sent: int
    bit_errors: int
    ber: float = field(init=False)
    ci95_halfwidth: float = field(init=False)

    def __post_init__(self):
        ber = self.bit_errors / self.bits_sent if self.bits_sent else 0.0
        object.__setattr__(self, "ber", ber)
        ci = 1.96 * math.sqrt(ber * (1 - ber) / self.bits_sent) if self.bits_sent else 0.0
        object.__setattr__(self, "ci95_halfwidth", ci)

    @property
    def ci_low(self) -> float:
        return self.ber - self.ci95_halfwidth

    @property
    def ci_high(self) -> float:
        return self.ber + self.ci95_halfwidth


def payload_bits(system: str, cfg: FrameConfig) -> int:
    if system == "otfs-cim":
        return bits_per_frame(cfg)
    if system == "otfs":
        return cfg.N * cfg.M * int(math.log2(cfg.Mq))
    return sm_payload_bits(cfg)


def _stack_paths(paths: list[PathSet]) -> PathSet:
    return PathSet(gains=np.stack([p.gains for p in paths]), delays=paths[0].delays,
                   doppler=np.stack([p.doppler for p in paths]))


def simulate_chunk(system: str, cfg: FrameConfig, seed: int, start: int, stop: int,
                   snr_db: float) -> tuple[int, int]:
    """Run frames ``start..stop-1`` and return ``(bits_sent, bit_errors)``."""
    n_tx = cfg.N_T if system == "otfs-sm" else 1
    nbits = payload_bits(system, cfg)
    D = cfg.N_R * cfg.N * cfg.M
    noise_shape = (D, cfg.L) if system == "otfs-cim" else (D,)
    per_tx = [[] for _ in range(n_tx)]
    payloads, noises = [], []
    for f in range(start, stop):
        rc = frame_rng(seed, f, CHANNEL_STREAM)
        for a in range(n_tx):
            per_tx[a].append(sample_paths(cfg, rc))
        rd = frame_rng(seed, f, DATA_STREAM)
        payloads.append(rd.integers(0, 2, nbits, dtype=np.int8))
        noises.append(draw_unit_noise(rd, noise_shape))
    reals = [realize(_stack_paths(p), cfg) for p in per_tx]
    bits = np.stack(payloads)
    noise = np.stack(noises)
    if system == "otfs-cim":
        codes = generate_wh(cfg.L, cfg.N_C)
        X = chips_to_time(spread_frame(map_bits(bits, cfg), codes), cfg.N, cfg.M)
        Y = apply_channel(X, reals[0], snr_db, noise=noise)
        _, hat = detect_frame(Y, reals[0], codes, cfg, noise_var=noise_variance(snr_db))
    elif system == "otfs":
        hat = otfs_transceive(bits, cfg, reals[0], snr_db, noise=noise)
    else:
        hat = otfs_sm_transceive(bits, cfg, reals, snr_db, noise=noise)
    return int(bits.size), int(np.count_nonzero(hat != bits))


Kernel = Callable[[str, FrameConfig, int, int, int, float], "tuple[int, int]"]


def run_point(spec: SweepSpec, snr_db: float, *, workers: int = 1,
              kernel: Kernel = simulate_chunk, executor=None) -> BerRecord:
    """Accumulate BER at one SNR until max_frames or min_bit_errors is reached."""
    bounds = [(s, min(s + spec.chunk_frames, spec.max_frames))
              for s in range(0, spec.max_frames, spec.chunk_frames)]
    frames = bits = errors = 0

    def done() -> bool:
        return bool(spec.min_bit_errors) and errors >= spec.min_bit_errors

    args = lambda b: (spec.system, spec.cfg, spec.seed, b[0], b[1], snr_db)  # noqa: E731
    if workers <= 1 and executor is None:
        for b in bounds:
            n, e = kernel(*args(b))
            frames, bits, errors = frames + b[1] - b[0], bits + n, errors + e
            if done():
                break
    else:
        own = executor is None
        pool = executor or ProcessPoolExecutor(max_workers=workers)
        try:
            wave = max(workers, 1)
            for i in range(0, len(bounds), wave):
                batch = bounds[i:i + wave]
                futures = [pool.submit(kernel, *args(b)) for b in batch]
                stop = False
                for b, fut in zip(batch, futures):
                    n, e = fut.result()
                    frames, bits, errors = frames + b[1] - b[0], bits + n, errors + e
                    if done():
                        stop = True
                        break
                if stop:
                    for fut in futures:
                        fut.cancel()
                    break
        finally:
            if own:
                pool.shutdown()
    log.info("%s snr=%s frames=%d errors=%d/%d", spec.system, snr_db, frames, errors, bits)
    return BerRecord(snr_db=snr_db, frames_run=frames, bits_sent=bits, bit_errors=errors)


def _fmt(x: float) -> str:
    return repr(float(x))


def records_csv(spec: SweepSpec, records, label: str | None = None) -> str:
    T_s = timing(spec.cfg).T_s
    eta = spectral_efficiency(spec.system, spec.cfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    head = ("label",) + CSV_COLUMNS if label is not None else CSV_COLUMNS
    writer.writerow(head)
    for r in records:
        row = [spec.system, _fmt(r.snr_db), r.frames_run, r.bits_sent, r.bit_errors,
               _fmt(r.ber), _fmt(r.ci95_halfwidth), _fmt(throughput(r.ber, T_s, eta))]
        writer.writerow(([label] if label is not None else []) + row)
    return buf.getvalue()


def _record_dict(r: BerRecord) -> dict:
    d = asdict(r)
    d["ber"], d["ci95_halfwidth"] = r.ber, r.ci95_halfwidth
    return d


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def run_sweep(spec: SweepSpec, out_prefix=None, *, workers: int = 1,
              kernel: Kernel = simulate_chunk) -> tuple[list[BerRecord], list[dict]]:
    """One BerRecord per SNR point plus the throughput metric table.

    With ``out_prefix`` set, writes ``<prefix>.csv``, ``<prefix>.json``
    and ``<prefix>.metrics.csv``.
    """
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        records = [run_point(spec, s, workers=workers, kernel=kernel, executor=executor)
                   for s in spec.snr_db_list]
    finally:
        if executor is not None:
            executor.shutdown()
    T_s = timing(spec.cfg).T_s
    eta = spectral_efficiency(spec.system, spec.cfg)
    metrics = [{"system": spec.system, "snr_db": r.snr_db, "ber": r.ber,
                "throughput_bps": throughput(r.ber, T_s, eta), "eta_bpcu": eta} for r in records]
    if out_prefix is not None:
        prefix = Path(out_prefix)
        _write(prefix.with_name(prefix.name + ".csv"), records_csv(spec, records))
        doc = {"spec": spec.to_dict(), "eta_bpcu": eta, "T_s": T_s,
               "records": [_record_dict(r) for r in records]}
        _write(prefix.with_name(prefix.name + ".json"), json.dumps(doc, indent=2) + "\n")
        _write(prefix.with_name(prefix.name + ".metrics.csv"), metric_table_csv(metrics))
    return records, metrics


def load_recipe(path) -> dict:
    """Parse a figure recipe: shared sweep settings plus one entry per curve."""
    doc = json.loads(Path(path).read_text())
    for key in ("name", "snr_db", "curves"):
        if key not in doc:
            raise ValueError(f"recipe {path}: missing key {key!r}")
    specs = []
    for curve in doc["curves"]:
        cfg = FrameConfig.from_dict(curve["config"])
        specs.append((curve["label"], SweepSpec(
            system=curve["system"], cfg=cfg, snr_db_list=tuple(doc["snr_db"]),
            max_frames=int(doc.get("max_frames", 10_000)),
            min_bit_errors=int(doc.get("min_bit_errors", 200)),
            seed=int(doc.get("seed", 0)),
        )))
    return {"name": doc["name"], "description": doc.get("description", ""), "curves": specs}


def run_recipe(path, out_prefix=None, *, workers: int = 1, max_frames: int | None = None,
               snr_db=None) -> dict:
    """Run every curve of a recipe; returns ``{label: [BerRecord, ...]}``.

    ``max_frames`` and ``snr_db`` override the recipe's own settings.
    """
    recipe = load_recipe(path)
    results, csv_parts, doc = {}, [], {"name": recipe["name"], "curves": []}
    for label, spec in recipe["curves"]:
        if max_frames is not None:
            spec = replace(spec, max_frames=max_frames)
        if snr_db is not None:
            spec = replace(spec, snr_db_list=tuple(snr_db))
        records, _ = run_sweep(spec, workers=workers)
        results[label] = records
        text = records_csv(spec, records, label=label)
        csv_parts.append(text if not csv_parts else text.split("\n", 1)[1])
        doc["curves"].append({"label": label, "spec": spec.to_dict(),
                              "records": [_record_dict(r) for r in records]})
    if out_prefix is not None:
        prefix = Path(out_prefix)
        _write(prefix.with_name(prefix.name + ".csv"), "".join(csv_parts))
        _write(prefix.with_name(prefix.name + ".json"), json.dumps(doc, indent=2) + "\n")
    return results
