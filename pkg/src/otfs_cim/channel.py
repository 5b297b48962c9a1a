"""Time-varying multipath channel in delay-Doppler form.

Receive-antenna blocks of G and H_eff are stacked antenna-major: row
``r*N*M + t`` is sample (or DD cell) t at antenna r.  Arrays may carry
leading batch axes, one per independent frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import FrameConfig, max_doppler_index

# stream ids for per-frame seed derivation
CHANNEL_STREAM = 0
DATA_STREAM = 1


def frame_rng(master_seed: int, frame_index: int, stream: int) -> np.random.Generator:
    """Generator for one frame; independent of how frames are scheduled."""
    ss = np.random.SeedSequence(entropy=int(master_seed) & (2**64 - 1), spawn_key=(int(frame_index), int(stream)))
    return np.random.default_rng(ss)


def noise_variance(snr_db: float) -> float:
    """N0 for unit symbol energy; +inf dB disables noise."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return 10.0 ** (-snr_db / 10.0)


@dataclass(frozen=True)
class PathSet:
    """Per-antenna path gains ``(..., N_R, P)``, shared integer delay taps
    ``(P,)`` in samples, and Doppler indices ``(..., N_R, P)``."""

    gains: np.ndarray
    delays: np.ndarray
    doppler: np.ndarray

    @property
    def n_rx(self) -> int:
        return self.gains.shape[-2]


@dataclass(frozen=True)
class ChannelRealization:
    paths: PathSet
    G: np.ndarray
    H_eff: np.ndarray


def identity_paths(cfg: FrameConfig) -> PathSet:
    """Single unit path, no delay, no Doppler, on every antenna."""
    return PathSet(
        gains=np.ones((cfg.N_R, 1), dtype=complex),
        delays=np.zeros(1, dtype=int),
        doppler=np.zeros((cfg.N_R, 1)),
    )


def sample_paths(cfg: FrameConfig, rng: np.random.Generator) -> PathSet:
    """Rayleigh gains with a uniform power delay profile and Jakes Doppler.

    Draw order per call is fixed (gains, then angles, antenna-major) so a
    seeded generator reproduces the same channel.
    """
    P, NR = cfg.P, cfg.N_R
    if P > cfg.N * cfg.M:
        raise ValueError(f"P={P} exceeds the N*M={cfg.N * cfg.M} samples of a frame")
    g = rng.standard_normal((NR, P, 2))
    gains = (g[..., 0] + 1j * g[..., 1]) * math.sqrt(0.5 / P)
    theta = rng.uniform(0.0, 2 * math.pi, size=(NR, P))
    doppler = max_doppler_index(cfg) * np.cos(theta)
    return PathSet(gains=gains, delays=np.arange(P), doppler=doppler)


def _shift_matrices(delays: np.ndarray, n: int) -> np.ndarray:
    eye = np.eye(n)
    return np.stack([np.roll(eye, int(k), axis=0) for k in delays])


def build_time_matrix(paths: PathSet, cfg: FrameConfig) -> np.ndarray:
    """G^r = sum_u h_u Delta(l_u) Pi^{k_u}, antenna blocks stacked vertically."""
    NM = cfg.N * cfg.M
    t = np.arange(NM)
    phase = np.exp(2j * np.pi * paths.doppler[..., None] * t / NM)
    shifts = _shift_matrices(paths.delays, NM)
    G = np.einsum("...rp,...rpt,pts->...rts", paths.gains, phase, shifts)
    return G.reshape(G.shape[:-3] + (-1, NM))


def effective_channel(G, cfg: FrameConfig) -> np.ndarray:
    """H_eff = (I_{N_R} (x) F_N (x) I_M) G (F_N^H (x) I_M)."""
    G = np.asarray(G)
    N, M = cfg.N, cfg.M
    NM = N * M
    if G.shape[-1] != NM or G.shape[-2] % NM:
        raise ValueError(f"G has shape {G.shape[-2:]}, expected (N_R*{NM}, {NM})")
    NR = G.shape[-2] // NM
    batch = G.shape[:-2]
    # right factor acts on column (slot n, delay l): inverse DFT over n
    cols = G.reshape(batch + (NR * NM, N, M))
    right = np.fft.ifft(cols, axis=-2, norm="ortho").reshape(batch + (NR * NM, NM))
    rows = right.reshape(batch + (NR, N, M, NM))
    H = np.fft.fft(rows, axis=-3, norm="ortho")
    return H.reshape(batch + (NR * NM, NM))


def realize(paths: PathSet, cfg: FrameConfig) -> ChannelRealization:
    G = build_time_matrix(paths, cfg)
    return ChannelRealization(paths=paths, G=G, H_eff=effective_channel(G, cfg))


def add_noise(Y, snr_db: float, rng: np.random.Generator | None = None, noise=None):
    """Add complex white Gaussian noise of per-component variance N0.

    ``noise`` (same shape as ``Y``, unit variance) replaces the draw
    from ``rng`` so callers can pre-generate noise per frame.
    """
    n0 = noise_variance(snr_db)
    if n0 == 0:
        return Y
    if noise is None:
        if rng is None:
            raise ValueError("an rng is required when noise is enabled")
        noise = draw_unit_noise(rng, Y.shape)
    return Y + math.sqrt(n0) * noise


def apply_channel(chip_frames, realization: ChannelRealization, snr_db: float,
                  rng: np.random.Generator | None = None, *, noise=None) -> np.ndarray:
    """y_l = G x_l + w_l for every chip column of ``chip_frames (..., NM, L)``.

    The realization is held fixed over all L chips.  Returns ``(..., N_R*NM, L)``.
    """
    X = np.asarray(chip_frames)
    G = realization.G
    if X.shape[-2] != G.shape[-1]:
        raise ValueError(f"chip frame length {X.shape[-2]} != N*M={G.shape[-1]}")
    return add_noise(G @ X, snr_db, rng, noise)


def draw_unit_noise(rng: np.random.Generator, shape) -> np.ndarray:
    w = rng.standard_normal(tuple(shape) + (2,))
    return (w[..., 0] + 1j * w[..., 1]) * math.sqrt(0.5)
