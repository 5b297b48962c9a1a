"""Plain OTFS and OTFS spatial modulation reference links.

Both use the same DD grid, channel model and ordered MMSE-SIC front end
as the CIM receiver, with joint ML over (transmit antenna, symbol) per
cell.  Plain OTFS is the single-antenna special case, so OTFS-SM with
N_T = 1 reproduces it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ChannelRealization, add_noise, noise_variance
from .config import FrameConfig
from .detector import column_sic
from .mapping import bits_to_int, build_constellation, int_to_bits
from .transforms import dd_to_time, time_to_dd


@dataclass(frozen=True)
class SmCell:
    antenna_index: int  # 1..N_T
    symbol: complex


def sm_payload_bits(cfg: FrameConfig) -> int:
    return cfg.N * cfg.M * (int(math.log2(cfg.Mq)) + int(math.log2(cfg.N_T)))


def map_sm(payload, cfg: FrameConfig):
    """Per cell: log2(N_T) antenna bits, then log2(Mq) symbol bits.

    Returns ``(antenna (..., N, M) 0-based, label (..., N, M))``.
    """
    payload = np.asarray(payload, dtype=np.int8)
    n = sm_payload_bits(cfg)
    if payload.shape[-1] != n:
        raise ValueError(f"payload length {payload.shape[-1]} != {n}")
    na = int(math.log2(cfg.N_T))
    blocks = payload.reshape(payload.shape[:-1] + (cfg.N, cfg.M, -1))
    return bits_to_int(blocks[..., :na]), bits_to_int(blocks[..., na:])


def demap_sm(antenna, label, cfg: FrameConfig) -> np.ndarray:
    na = int(math.log2(cfg.N_T))
    q = int(math.log2(cfg.Mq))
    bits = np.concatenate([int_to_bits(antenna, na), int_to_bits(label, q)], axis=-1)
    return bits.reshape(bits.shape[:-3] + (-1,))


def sm_cells(payload, cfg: FrameConfig) -> list[list[SmCell]]:
    const = build_constellation(cfg.Mq)
    ant, lab = map_sm(payload, cfg)
    return [[SmCell(int(ant[k, l]) + 1, complex(const.points[lab[k, l]])) for l in range(cfg.M)]
            for k in range(cfg.N)]


def _transceive(payload, cfg, realizations, snr_db, rng, noise, n_tx):
    if len(realizations) != n_tx:
        raise ValueError(f"expected {n_tx} channel realization(s), got {len(realizations)}")
    cfg_tx = replace(cfg, N_T=n_tx)
    const = build_constellation(cfg.Mq)
    ant, lab = map_sm(payload, cfg_tx)
    sym = const.points[lab]
    y = 0
    for a, real in enumerate(realizations):
        x = dd_to_time(np.where(ant == a, sym, 0))
        y = y + np.einsum("...ij,...j->...i", real.G, x)
    y = add_noise(y, snr_db, rng, noise)
    batch = y.shape[:-1]
    NM = cfg.N * cfg.M
    y_dd = time_to_dd(y.reshape(batch + (cfg.N_R, NM)), cfg.N, cfg.M).reshape(batch + (-1,))
    H = np.stack([np.broadcast_to(r.H_eff, batch + r.H_eff.shape[-2:]) for r in realizations], axis=-3)
    flat_y = y_dd.reshape((-1, y_dd.shape[-1]))
    flat_H = H.reshape((-1,) + H.shape[-3:])
    ant_hat, lab_hat = column_sic(flat_y, flat_H, const.points, noise_variance(snr_db))
    grid = batch + (cfg.N, cfg.M)
    return demap_sm(ant_hat.reshape(grid), lab_hat.reshape(grid), cfg_tx)


def otfs_transceive(payload, cfg: FrameConfig, realization: ChannelRealization, snr_db: float,
                    rng: np.random.Generator | None = None, *, noise=None) -> np.ndarray:
    """Mq-QAM per DD cell through ``realization``; returns detected bits.

    ``payload`` has ``N*M*log2(Mq)`` bits and may carry batch axes.
    ``noise`` optionally supplies unit-variance receiver noise of shape
    ``(..., N_R*N*M)``.
    """
    return _transceive(payload, cfg, [realization], snr_db, rng, noise, 1)


def otfs_sm_transceive(payload, cfg: FrameConfig, realizations: Sequence[ChannelRealization],
                       snr_db: float, rng: np.random.Generator | None = None, *,
                       noise=None) -> np.ndarray:
    """Spatial modulation over ``cfg.N_T`` antennas, one realization each."""
    if cfg.N_T < 1 or cfg.N_T & (cfg.N_T - 1):
        raise ValueError(f"N_T={cfg.N_T} is not a power of two")
    return _transceive(payload, cfg, list(realizations), snr_db, rng, noise, cfg.N_T)
