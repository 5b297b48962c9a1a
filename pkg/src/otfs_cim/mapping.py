"""QAM constellations and the CIM bit mapper / demapper.

Within every per-cell bit block the field order is::

    [ c_re index bits | c_im index bits | QAM label bits ]

Code indices use natural binary (index = value + 1).  QAM labels put the
real-axis bits first; the real axis maps bit 0 to the negative level and
the imaginary axis maps bit 0 to the positive level, so for 4-QAM the
label ``01`` is the point (-1 - 1j)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import FrameConfig, cell_bits, bits_per_frame


def int_to_bits(values, width: int) -> np.ndarray:
    """MSB-first bit expansion along a new trailing axis."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.int8)


def bits_to_int(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[-1]
    if width == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits @ weights


def _gray_decode(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64)
    out = g.copy()
    shift = g >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out


@dataclass(frozen=True)
class QamConstellation:
    """Unit-average-energy QAM alphabet.

    ``points[i]`` is the symbol whose bit label is the integer ``i``
    (MSB first), so the lowest label is also the lowest index.
    """

    order: int
    points: np.ndarray
    bit_labels: np.ndarray
    scale: float

    @property
    def bits(self) -> int:
        return int(math.log2(self.order))

    def index_of(self, symbol: complex, atol: float = 1e-9) -> int:
        dist = np.abs(self.points - symbol)
        i = int(np.argmin(dist))
        if dist[i] > atol:
            raise ValueError(f"symbol {symbol!r} is not in the {self.order}-QAM alphabet")
        return i


def _separable_points(bits_re: int, bits_im: int) -> np.ndarray:
    labels = np.arange(1 << (bits_re + bits_im))
    g_re = labels >> bits_im
    g_im = labels & ((1 << bits_im) - 1)
    m_re, m_im = 1 << bits_re, 1 << bits_im
    re = 2 * _gray_decode(g_re) - (m_re - 1)
    im = (m_im - 1) - 2 * _gray_decode(g_im)
    return re + 1j * im


def _cross_points(q: int) -> np.ndarray:
    side = 3 * (1 << ((q - 3) // 2))
    corner = side // 6
    levels = np.arange(-(side - 1), side, 2)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    edge = side // 2 - corner
    in_corner = (np.abs(re) > 2 * edge - 1) & (np.abs(im) > 2 * edge - 1)
    pts = (re + 1j * im)[~in_corner]
    order = np.lexsort((pts.imag, pts.real))
    return pts[order]


def build_constellation(Mq: int) -> QamConstellation:
    """Gray-labelled square QAM, or a rectangular (8) / cross (>= 32) alphabet."""
    if Mq < 4 or Mq & (Mq - 1):
        raise ValueError(f"unsupported QAM order {Mq}")
    q = int(math.log2(Mq))
    if q % 2 == 0:
        raw = _separable_points(q // 2, q // 2)
    elif q == 3:
        raw = _separable_points(2, 1)
    else:
        raw = _cross_points(q)
    assert raw.size == Mq
    scale = 1.0 / math.sqrt(np.mean(np.abs(raw) ** 2))
    points = raw * scale
    points.setflags(write=False)
    labels = int_to_bits(np.arange(Mq), q)
    labels.setflags(write=False)
    return QamConstellation(order=Mq, points=points, bit_labels=labels, scale=scale)


@dataclass(frozen=True)
class CimCell:
    s_re: float
    s_im: float
    c_re: int
    c_im: int


@dataclass
class DDFrame:
    """CIM selections over the N x M delay-Doppler grid.

    ``c_re``, ``c_im`` (1-based) and ``label`` have shape ``(..., N, M)``;
    leading axes index independent frames.
    """

    c_re: np.ndarray
    c_im: np.ndarray
    label: np.ndarray
    constellation: QamConstellation
    payload: np.ndarray | None = field(default=None, repr=False)

    @property
    def symbols(self) -> np.ndarray:
        return self.constellation.points[self.label]

    @property
    def s_re(self) -> np.ndarray:
        return self.symbols.real

    @property
    def s_im(self) -> np.ndarray:
        return self.symbols.imag

    def cell(self, k: int, l: int) -> CimCell:
        s = complex(self.symbols[..., k, l])
        return CimCell(s.real, s.imag, int(self.c_re[..., k, l]), int(self.c_im[..., k, l]))

    def cells(self) -> list[list[CimCell]]:
        N, M = self.label.shape[-2:]
        return [[self.cell(k, l) for l in range(M)] for k in range(N)]


def map_bits(payload, cfg: FrameConfig, constellation: QamConstellation | None = None) -> DDFrame:
    """Split a payload of ``bits_per_frame(cfg)`` bits into N*M CIM cells.

    ``payload`` may carry leading batch axes.
    """
    payload = np.asarray(payload, dtype=np.int8)
    n = bits_per_frame(cfg)
    if payload.shape[-1] != n:
        raise ValueError(f"payload length {payload.shape[-1]} != bits_per_frame {n}")
    if np.any((payload != 0) & (payload != 1)):
        raise ValueError("payload must contain only 0/1")
    const = constellation or build_constellation(cfg.Mq)
    nc = int(math.log2(cfg.N_C))
    blocks = payload.reshape(payload.shape[:-1] + (cfg.N, cfg.M, cell_bits(cfg)))
    c_re = bits_to_int(blocks[..., :nc]) + 1
    c_im = bits_to_int(blocks[..., nc:2 * nc]) + 1
    label = bits_to_int(blocks[..., 2 * nc:])
    return DDFrame(c_re=c_re, c_im=c_im, label=label, constellation=const, payload=payload)


def frame_from_cells(cells, cfg: FrameConfig, constellation: QamConstellation | None = None) -> DDFrame:
    const = constellation or build_constellation(cfg.Mq)
    N, M = cfg.N, cfg.M
    if len(cells) != N or any(len(row) != M for row in cells):
        raise ValueError(f"expected an {N}x{M} grid of cells")
    c_re = np.empty((N, M), dtype=np.int64)
    c_im = np.empty((N, M), dtype=np.int64)
    label = np.empty((N, M), dtype=np.int64)
    for k in range(N):
        for l in range(M):
            cell = cells[k][l]
            for name, idx in (("c_re", cell.c_re), ("c_im", cell.c_im)):
                if not 1 <= idx <= cfg.N_C:
                    raise ValueError(f"cell ({k},{l}): {name}={idx} outside 1..{cfg.N_C}")
            c_re[k, l], c_im[k, l] = cell.c_re, cell.c_im
            label[k, l] = const.index_of(complex(cell.s_re, cell.s_im))
    return DDFrame(c_re=c_re, c_im=c_im, label=label, constellation=const)


def demap_frame(frame, cfg: FrameConfig) -> np.ndarray:
    """Inverse of :func:`map_bits`.  Accepts a DDFrame or an N x M grid of CimCell."""
    if not isinstance(frame, DDFrame):
        frame = frame_from_cells(frame, cfg)
    nc = int(math.log2(cfg.N_C))
    q = int(math.log2(cfg.Mq))
    c_re = np.asarray(frame.c_re)
    c_im = np.asarray(frame.c_im)
    label = np.asarray(frame.label)
    if np.any((c_re < 1) | (c_re > cfg.N_C) | (c_im < 1) | (c_im > cfg.N_C)):
        raise ValueError("code index outside 1..N_C")
    if np.any((label < 0) | (label >= cfg.Mq)):
        raise ValueError("QAM label outside the alphabet")
    blocks = np.concatenate(
        [int_to_bits(c_re - 1, nc), int_to_bits(c_im - 1, nc), int_to_bits(label, q)], axis=-1
    )
    return blocks.reshape(blocks.shape[:-3] + (-1,))
