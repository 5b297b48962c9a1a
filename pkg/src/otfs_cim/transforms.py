"""ISFFT/SFFT and rectangular-pulse Heisenberg/Wigner transforms.

Grids are arrays whose last two axes are ``(N, M)``: Doppler index k by
delay index l in the DD domain, time slot n by subcarrier m in the TF
domain.  Time-domain frames are length ``N*M`` vectors, slot-major
(sample n*M + m).  All transforms are unitary.
"""

from __future__ import annotations

import numpy as np


def isfft(dd) -> np.ndarray:
    """S[n,m] = 1/sqrt(NM) sum_k sum_l s[k,l] exp(j2pi(nk/N - ml/M))."""
    dd = np.asarray(dd, dtype=complex)
    return np.fft.fft(np.fft.ifft(dd, axis=-2, norm="ortho"), axis=-1, norm="ortho")


def sfft(tf) -> np.ndarray:
    tf = np.asarray(tf, dtype=complex)
    return np.fft.fft(np.fft.ifft(tf, axis=-1, norm="ortho"), axis=-2, norm="ortho")


def heisenberg(tf) -> np.ndarray:
    """M-point inverse DFT of each slot, then slots concatenated."""
    tf = np.asarray(tf, dtype=complex)
    x = np.fft.ifft(tf, axis=-1, norm="ortho")
    return x.reshape(x.shape[:-2] + (-1,))


def wigner(x, N: int, M: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != N * M:
        raise ValueError(f"time vector length {x.shape[-1]} != N*M={N * M}")
    return np.fft.fft(x.reshape(x.shape[:-1] + (N, M)), axis=-1, norm="ortho")


def dd_to_time(dd) -> np.ndarray:
    return heisenberg(isfft(dd))


def time_to_dd(x, N: int, M: int) -> np.ndarray:
    return sfft(wigner(x, N, M))


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, F[a,b] = exp(-j2pi ab/n)/sqrt(n)."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def dd_to_time_matrix(N: int, M: int) -> np.ndarray:
    """Composite DD->time operator, assembled column by column."""
    NM = N * M
    eye = np.eye(NM).reshape(NM, N, M)
    return dd_to_time(eye).T


def chips_to_time(X, N: int, M: int) -> np.ndarray:
    """DD chip matrix ``(..., NM, L)`` -> time chip frames ``(..., NM, L)``."""
    X = np.asarray(X)
    grids = np.swapaxes(X, -1, -2).reshape(X.shape[:-2] + (X.shape[-1], N, M))
    return np.swapaxes(dd_to_time(grids), -1, -2)


def time_to_chips(Y, N: int, M: int, N_R: int = 1) -> np.ndarray:
    """Received time chips ``(..., N_R*NM, L)`` -> DD chips, per antenna block."""
    Y = np.asarray(Y)
    L = Y.shape[-1]
    blocks = np.swapaxes(Y, -1, -2).reshape(Y.shape[:-2] + (L, N_R, N, M))
    dd = sfft(wigner(blocks.reshape(blocks.shape[:-2] + (N * M,)), N, M))
    return np.swapaxes(dd.reshape(Y.shape[:-2] + (L, N_R * N * M)), -1, -2)
