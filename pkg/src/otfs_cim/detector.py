"""Despreading-based ML receiver for OTFS-CIM, plus an exhaustive oracle.

All N*M cells are on air at once, so their DD channel columns overlap.
The receiver separates them by ordered successive interference
cancellation: at each stage the undetected cell with the best
post-suppression SINR is isolated with an MMSE filter (the other
undetected cells are treated as Gaussian interference), decided, and
its reconstructed chips are subtracted from the residual.  For a single
isolated cell this reduces to the textbook per-cell model y = s*h_v + w.

The per-cell decision follows the sequential CIM rule: correlate the
I and Q chip streams with every code, pick the codes with the largest
squared correlator norms, then search the QAM alphabet for the symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FrameConfig
from .mapping import DDFrame, QamConstellation, build_constellation, demap_frame
from .spreading import SpreadingCodeSet, correlate
from .transforms import time_to_chips

# relative noise floor keeping the MMSE solve well posed when noise is off
_NOISE_FLOOR = 1e-9


class SearchSpaceError(ValueError):
    pass


@dataclass(frozen=True)
class CellDecision:
    c_re: int
    c_im: int
    s_re: float
    s_im: float
    metric: float


@dataclass
class FrameDecision:
    """Per-cell decisions as ``(..., N, M)`` arrays."""

    c_re: np.ndarray
    c_im: np.ndarray
    label: np.ndarray
    metric: np.ndarray
    constellation: QamConstellation
    hypotheses: int = 0

    def as_frame(self) -> DDFrame:
        return DDFrame(c_re=self.c_re, c_im=self.c_im, label=self.label,
                       constellation=self.constellation)

    def cell(self, k: int, l: int) -> CellDecision:
        s = complex(self.constellation.points[self.label[..., k, l]])
        return CellDecision(int(self.c_re[..., k, l]), int(self.c_im[..., k, l]),
                            s.real, s.imag, float(self.metric[..., k, l]))


def search_size(cfg: FrameConfig) -> dict:
    """Hypotheses scored per cell by the sequential and the joint search."""
    return {"sequential": 2 * cfg.N_C + cfg.Mq, "joint": cfg.Mq * cfg.N_C ** 2}


def estimate_code_indices(outputs_I, outputs_Q):
    """Argmax of the squared correlator norm on each branch (1-based).

    Inputs are ``(..., N_C, D)`` correlator output vectors (``D`` may be
    omitted for scalar outputs).  Ties go to the smallest index.
    """
    oi, oq = np.asarray(outputs_I), np.asarray(outputs_Q)
    if oi.ndim == 1:
        oi, oq = oi[:, None], oq[:, None]
    e_i = np.sum(np.abs(oi) ** 2, axis=-1)
    e_q = np.sum(np.abs(oq) ** 2, axis=-1)
    return np.argmax(e_i, axis=-1) + 1, np.argmax(e_q, axis=-1) + 1


def _ml_label(y_I, y_Q, h, points):
    y = np.asarray(y_I) + 1j * np.asarray(y_Q)
    h = np.asarray(h)
    # ||y - s h||^2 expanded so all points are scored at once
    yy = np.sum(np.abs(y) ** 2, axis=-1)
    hy = np.sum(h.conj() * y, axis=-1)
    hh = np.sum(np.abs(h) ** 2, axis=-1)
    metric = (yy[..., None] - 2 * np.real(points.conj() * hy[..., None])
              + np.abs(points) ** 2 * hh[..., None])
    label = np.argmin(metric, axis=-1)
    best = np.take_along_axis(metric, label[..., None], axis=-1)[..., 0]
    return label, np.maximum(best, 0.0)


def ml_symbol(y_I, y_Q, h_v, constellation: QamConstellation):
    """Symbol minimizing ||(y_I + j y_Q) - (s_re + j s_im) h_v||^2.

    Returns ``(s_re, s_im, metric)``; ties go to the lowest label.
    """
    label, metric = _ml_label(y_I, y_Q, h_v, constellation.points)
    s = constellation.points[label]
    return s.real, s.imag, metric


def _sequential_cell(t, h, codes, points):
    """Despread one equalized cell ``t (B, L)`` seen through column ``h (B, D)``."""
    rho_I = correlate(t.real, codes)
    rho_Q = correlate(t.imag, codes)
    # per-cell correlator outputs re-expressed along the channel column
    y_I = rho_I[..., None] * h[:, None, :]
    y_Q = rho_Q[..., None] * h[:, None, :]
    c_re, c_im = estimate_code_indices(y_I, y_Q)
    b = np.arange(t.shape[0])
    label, metric = _ml_label(y_I[b, c_re - 1], y_Q[b, c_im - 1], h, points)
    hyp = rho_I.shape[-1] + rho_Q.shape[-1] + points.size
    return label, c_re, c_im, metric, hyp


def _joint_cell(t, h, codes, points):
    """Exhaustive chip-domain search over (symbol, c_re, c_im)."""
    Z = codes.chips.T  # (N_C, L)
    r_I, r_Q = t.real, t.imag
    e_I = np.sum((r_I[:, None, None, :] - points.real[None, :, None, None] * Z) ** 2, axis=-1)
    e_Q = np.sum((r_Q[:, None, None, :] - points.imag[None, :, None, None] * Z) ** 2, axis=-1)
    total = e_I[:, :, :, None] + e_Q[:, :, None, :]  # (B, Mq, N_C, N_C)
    flat = total.reshape(total.shape[0], -1)
    best = np.argmin(flat, axis=-1)
    label, c_re, c_im = np.unravel_index(best, total.shape[1:])
    metric = flat[np.arange(flat.shape[0]), best]
    return label, c_re + 1, c_im + 1, metric, total[0].size


def _cim_sic(Y, H, codes, points, noise_var, cell_rule):
    """Ordered MMSE-SIC over cells. ``Y (B, D, L)`` DD chips, ``H (B, D, NM)``."""
    B, D, L = Y.shape
    NM = H.shape[-1]
    chip_power = 1.0 / L
    eps = max(noise_var, _NOISE_FLOOR * chip_power)
    eye = np.eye(D)
    active = np.ones((B, NM), dtype=bool)
    resid = Y.astype(complex, copy=True)
    b = np.arange(B)
    out_label = np.zeros((B, NM), dtype=np.int64)
    out_cre = np.zeros((B, NM), dtype=np.int64)
    out_cim = np.zeros((B, NM), dtype=np.int64)
    out_metric = np.zeros((B, NM))
    hyp = 0
    for _ in range(NM):
        Ha = H * active[:, None, :]
        C = chip_power * (Ha @ np.conj(np.swapaxes(Ha, -1, -2))) + eps * eye
        W = np.linalg.solve(C, H)
        gain = np.real(np.sum(H.conj() * W, axis=-2))
        v = np.argmax(np.where(active, gain, -np.inf), axis=-1)
        h, w = H[b, :, v], W[b, :, v]
        t = np.einsum("bd,bdl->bl", w.conj(), resid) / np.sum(w.conj() * h, axis=-1)[:, None]
        label, c_re, c_im, metric, hyp = cell_rule(t, h, codes, points)
        s = points[label]
        x_hat = s.real[:, None] * codes.chips.T[c_re - 1] + 1j * s.imag[:, None] * codes.chips.T[c_im - 1]
        resid -= h[:, :, None] * x_hat[:, None, :]
        out_label[b, v], out_cre[b, v], out_cim[b, v], out_metric[b, v] = label, c_re, c_im, metric
        active[b, v] = False
    return out_label, out_cre, out_cim, out_metric, hyp


def _run_cim(received, realization, codes, cfg, noise_var, constellation, rule):
    const = constellation or build_constellation(cfg.Mq)
    Y = np.asarray(received)
    batch = Y.shape[:-2]
    Ydd = time_to_chips(Y, cfg.N, cfg.M, cfg.N_R).reshape((-1,) + Y.shape[-2:])
    H = np.broadcast_to(realization.H_eff, batch + realization.H_eff.shape[-2:])
    H = H.reshape((-1,) + H.shape[-2:])
    label, c_re, c_im, metric, hyp = _cim_sic(Ydd, H, codes, const.points, noise_var, rule)
    grid = batch + (cfg.N, cfg.M)
    return FrameDecision(c_re=c_re.reshape(grid), c_im=c_im.reshape(grid),
                         label=label.reshape(grid), metric=metric.reshape(grid),
                         constellation=const, hypotheses=hyp)


def detect_frame(received, realization, codes: SpreadingCodeSet, cfg: FrameConfig, *,
                 noise_var: float = 0.0, constellation: QamConstellation | None = None):
    """Detect OTFS-CIM frames from received time-domain chips ``(..., N_R*NM, L)``.

    Returns ``(decisions, bits)``.
    """
    dec = _run_cim(received, realization, codes, cfg, noise_var, constellation, _sequential_cell)
    return dec, demap_frame(dec.as_frame(), cfg)


def joint_ml_oracle(received, realization, codes: SpreadingCodeSet, cfg: FrameConfig, *,
                    noise_var: float = 0.0, constellation: QamConstellation | None = None,
                    max_search: int = 4096) -> FrameDecision:
    """Same front end as :func:`detect_frame`, exhaustive per-cell search."""
    size = cfg.Mq * cfg.N_C ** 2
    if size > max_search:
        raise SearchSpaceError(f"per-cell search of {size} hypotheses exceeds cap {max_search}")
    return _run_cim(received, realization, codes, cfg, noise_var, constellation, _joint_cell)


def column_sic(y, H_tx, points, noise_var, max_sweeps: int = 8):
    """Joint (transmit antenna, symbol) ML per cell inside ordered MMSE-SIC.

    ``y (B, D)`` is the received DD vector, ``H_tx (B, N_T, D, NM)`` holds
    one effective channel per transmit antenna.  Each cell is active on
    one antenna with unit power.  The SIC decisions then seed a
    coordinate-descent refinement of the exact frame ML cost.  Returns
    ``(antenna, label)`` arrays of shape ``(B, NM)``; antenna is 0-based.
    """
    B, NT, D, NM = H_tx.shape
    p = 1.0 / NT  # per-antenna share of a cell's unit power
    eps = max(noise_var, _NOISE_FLOOR)
    eye = np.eye(D)
    b = np.arange(B)
    active = np.ones((B, NM), dtype=bool)
    resid = y.astype(complex, copy=True)
    out_ant = np.zeros((B, NM), dtype=np.int64)
    out_label = np.zeros((B, NM), dtype=np.int64)
    cols = np.moveaxis(H_tx, -1, 1)  # (B, NM, NT, D)
    pw = np.abs(points) ** 2
    for _ in range(NM):
        rel = np.full((B, NM), -np.inf)
        best_ant = np.zeros((B, NM), dtype=np.int64)
        best_lab = np.zeros((B, NM), dtype=np.int64)
        for v in range(NM):
            others = active.copy()
            others[:, v] = False
            Hm = (cols * others[:, :, None, None]).reshape(B, NM * NT, D)
            C = p * (np.swapaxes(Hm, -1, -2) @ Hm.conj()) + eps * eye
            hv = np.swapaxes(cols[:, v], -1, -2)  # (B, D, NT)
            sol = np.linalg.solve(C, np.concatenate([hv, resid[:, :, None]], axis=-1))
            g = np.real(np.sum(hv.conj() * sol[..., :NT], axis=-2))  # (B, NT)
            bb = np.sum(hv.conj() * sol[..., NT:], axis=-2)  # (B, NT)
            metric = g[..., None] * pw - 2 * np.real(points.conj() * bb[..., None])
            flat = np.argmin(metric.reshape(B, -1), axis=-1)
            best_ant[:, v], best_lab[:, v] = np.divmod(flat, points.size)
            rel[:, v] = np.where(active[:, v], g.mean(axis=-1), -np.inf)
        v = np.argmax(rel, axis=-1)
        a, lab = best_ant[b, v], best_lab[b, v]
        resid -= points[lab][:, None] * cols[b, v, a]
        out_ant[b, v], out_label[b, v] = a, lab
        active[b, v] = False
    refine_column_decisions(y, cols, points, out_ant, out_label, max_sweeps)
    return out_ant, out_label


def refine_column_decisions(y, cols, points, ant, label, max_sweeps):
    """Coordinate descent on the frame ML cost ||y - sum_v s_v h_v^{a_v}||^2.

    Each cell in turn is re-decided with every other cell's current
    decision subtracted; no step can raise the cost.  Updates ``ant`` and
    ``label`` in place and returns the number of sweeps run.
    """
    B, NM = ant.shape
    b = np.arange(B)
    pw = np.abs(points) ** 2
    hh = np.sum(np.abs(cols) ** 2, axis=-1)  # (B, NM, NT)
    recon = np.einsum("bv,bvd->bd", points[label], cols[b[:, None], np.arange(NM), ant])
    for sweep in range(max_sweeps):
        changed = False
        for v in range(NM):
            own = points[label[:, v]][:, None] * cols[b, v, ant[:, v]]
            r = y - recon + own
            hr = np.einsum("btd,bd->bt", cols[:, v].conj(), r)
            metric = hh[:, v, :, None] * pw - 2 * np.real(points.conj() * hr[..., None])
            flat = np.argmin(metric.reshape(B, -1), axis=-1)
            new_ant, new_lab = np.divmod(flat, points.size)
            cur = metric[b, ant[:, v], label[:, v]]
            better = metric[b, new_ant, new_lab] < cur - 1e-12 * (1 + np.abs(cur))
            if np.any(better):
                changed = True
                ant[better, v], label[better, v] = new_ant[better], new_lab[better]
                recon = recon - own + points[label[:, v]][:, None] * cols[b, v, ant[:, v]]
        if not changed:
            return sweep + 1
    return max_sweeps
