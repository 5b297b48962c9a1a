"""Walsh-Hadamard codes, chip spreading and the correlator bank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .mapping import CimCell, DDFrame


@dataclass(frozen=True)
class SpreadingCodeSet:
    """``chips[:, c-1]`` is code ``c``; entries are +-1/sqrt(L)."""

    L: int
    N_C: int
    chips: np.ndarray

    def code(self, c: int) -> np.ndarray:
        return self.chips[:, c - 1]


def generate_wh(L: int, N_C: int) -> SpreadingCodeSet:
    """First ``N_C`` columns of the order-``L`` Sylvester-Hadamard matrix over sqrt(L)."""
    if L < 1 or L & (L - 1):
        raise ValueError(f"L={L} is not a power of two")
    if not 1 <= N_C <= L:
        raise ValueError(f"N_C={N_C} must lie in 1..L={L}")
    chips = hadamard(L)[:, :N_C] / np.sqrt(L)
    chips.setflags(write=False)
    return SpreadingCodeSet(L=L, N_C=N_C, chips=chips)


def spread_cell(cell: CimCell, codes: SpreadingCodeSet) -> tuple[np.ndarray, np.ndarray]:
    """I-branch and Q-branch chip sequences of one cell."""
    return cell.s_re * codes.code(cell.c_re), cell.s_im * codes.code(cell.c_im)


def spread_frame(frame: DDFrame, codes: SpreadingCodeSet) -> np.ndarray:
    """DD chip matrix of shape ``(..., N*M, L)``.

    Column l holds the DD grid (row-major, v = k*M + l) scaled by chip l,
    with the two branches combined as z_re*s_re + j*z_im*s_im.
    """
    sym = frame.symbols
    shape = sym.shape[:-2] + (-1,)
    s_re = sym.real.reshape(shape)
    s_im = sym.imag.reshape(shape)
    z_re = codes.chips.T[np.asarray(frame.c_re).reshape(shape) - 1]
    z_im = codes.chips.T[np.asarray(frame.c_im).reshape(shape) - 1]
    return s_re[..., None] * z_re + 1j * s_im[..., None] * z_im


def correlate(received_chips, codes: SpreadingCodeSet) -> np.ndarray:
    """Correlator bank: ``(..., rows, L) -> (..., rows, N_C)``; column c-1 is Y z_c."""
    Y = np.asarray(received_chips)
    if Y.shape[-1] != codes.L:
        raise ValueError(f"chip dimension {Y.shape[-1]} != L={codes.L}")
    return Y @ codes.chips
