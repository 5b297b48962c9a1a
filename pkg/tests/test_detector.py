import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otfs_cim.channel import (PathSet, apply_channel, frame_rng, identity_paths, noise_variance, realize,
                              sample_paths)
from otfs_cim.config import FrameConfig, bits_per_frame, validate
from otfs_cim.detector import (SearchSpaceError, column_sic, detect_frame, estimate_code_indices,
                               joint_ml_oracle, ml_symbol, refine_column_decisions, search_size)
from otfs_cim.mapping import build_constellation, map_bits
from otfs_cim.spreading import generate_wh, spread_frame
from otfs_cim.transforms import chips_to_time


def transmit(cfg, bits, real, snr_db, rng=None):
    codes = generate_wh(cfg.L, cfg.N_C)
    frame = map_bits(bits, cfg)
    Y = apply_channel(chips_to_time(spread_frame(frame, codes), cfg.N, cfg.M), real, snr_db, rng)
    return frame, codes, Y


def test_code_indices_examples():
    assert tuple(estimate_code_indices(np.zeros((2, 5)), np.zeros((2, 5)))) == (1, 1)
    oi = np.array([[0.0, 0.0], [0.3, -0.4]])
    oq = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert tuple(estimate_code_indices(oi, oq)) == (2, 1)
    # exact tie resolves to the smaller index
    assert estimate_code_indices(np.ones((4, 3)), np.ones((4, 3)))[0] == 1


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(1e-6, 1e6))
def test_code_index_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    oi = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    oq = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
    a = estimate_code_indices(oi, oq)
    b = estimate_code_indices(scale * oi, scale * oq)
    assert tuple(map(int, a)) == tuple(map(int, b))


def test_ml_symbol_examples():
    const = build_constellation(16)
    h = np.zeros(6, complex)
    h[0] = 1
    for p in const.points:
        s_re, s_im, metric = ml_symbol(p.real * h, p.imag * h, h, const)
        assert complex(s_re, s_im) == p and metric < 1e-15
    # zero observation on a symmetric alphabet: lowest label wins the tie
    s_re, s_im, _ = ml_symbol(np.zeros(6), np.zeros(6), h, build_constellation(4))
    assert complex(s_re, s_im) == build_constellation(4).points[0]


@pytest.mark.parametrize("Mq", [4, 8, 16, 64])
def test_ml_symbol_brute_force(Mq):
    const = build_constellation(Mq)
    rng = np.random.default_rng(Mq)
    for _ in range(200):
        h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        best, best_d = None, math.inf
        for p in const.points:
            d = sum(abs(y[i] - p * h[i]) ** 2 for i in range(8))
            if d < best_d:
                best, best_d = p, d
        s_re, s_im, metric = ml_symbol(y.real, y.imag, h, const)
        assert complex(s_re, s_im) == best
        assert metric == pytest.approx(best_d, rel=1e-9, abs=1e-12)


def test_search_sizes_and_counters():
    cfg = FrameConfig(Mq=4, N_C=2)
    assert search_size(cfg) == {"sequential": 8, "joint": 16}
    real = realize(sample_paths(cfg, np.random.default_rng(0)), cfg)
    bits = np.zeros(bits_per_frame(cfg), dtype=np.int8)
    _, codes, Y = transmit(cfg, bits, real, math.inf)
    dec, _ = detect_frame(Y, real, codes, cfg)
    assert dec.hypotheses == 2 * 2 + 4
    assert joint_ml_oracle(Y, real, codes, cfg).hypotheses == 4 * 2 * 2
    big = FrameConfig(Mq=256, N_C=8, L=16)
    assert search_size(big)["sequential"] == 272 and search_size(big)["joint"] == 16384


def test_oracle_refuses_large_search():
    cfg = FrameConfig(Mq=256, N_C=8, L=16)
    with pytest.raises(SearchSpaceError):
        joint_ml_oracle(np.zeros((16, 16)), None, generate_wh(16, 8), cfg)


def test_table_frame_identity_channel():
    cfg = FrameConfig(N=4, M=4, Mq=4, N_C=2, N_R=1, P=1)
    bits = np.zeros(64, dtype=np.int8)
    bits[:8] = [0, 0, 0, 1, 1, 0, 0, 1]
    bits[-4:] = 1
    real = realize(identity_paths(cfg), cfg)
    frame, codes, Y = transmit(cfg, bits, real, math.inf)
    dec, hat = detect_frame(Y, real, codes, cfg)
    np.testing.assert_array_equal(hat, bits)
    assert dec.cell(0, 0).c_re == 1 and dec.cell(0, 1).c_re == 2
    assert (dec.cell(3, 3).c_re, dec.cell(3, 3).c_im) == (2, 2)
    assert np.sign(dec.cell(3, 3).s_re) == 1 and np.sign(dec.cell(3, 3).s_im) == -1


@pytest.mark.parametrize("kw", [
    dict(), dict(Mq=16, N_C=4), dict(N=3, M=3, N_R=2), dict(Mq=8, N_C=8, L=8),
    dict(N=4, M=4, N_R=1, P=4, L=4, N_C=4),
])
def test_noiseless_exactness(kw):
    cfg = validate(FrameConfig(**kw), allow_cross=True)
    for f in range(10):
        rng = frame_rng(99, f, 0)
        real = realize(sample_paths(cfg, rng), cfg)
        bits = rng.integers(0, 2, bits_per_frame(cfg), dtype=np.int8)
        frame, codes, Y = transmit(cfg, bits, real, math.inf)
        dec, hat = detect_frame(Y, real, codes, cfg)
        np.testing.assert_array_equal(hat, bits)
        assert np.all(dec.metric >= 0) and np.all(dec.metric < 1e-8)


def test_batched_detection_matches_single():
    cfg = FrameConfig()
    rng = np.random.default_rng(21)
    real = realize(sample_paths(cfg, rng), cfg)
    bits = rng.integers(0, 2, (5, bits_per_frame(cfg)), dtype=np.int8)
    _, codes, Y = transmit(cfg, bits, real, 5.0, rng)
    _, batched = detect_frame(Y, real, codes, cfg, noise_var=noise_variance(5.0))
    for i in range(5):
        _, single = detect_frame(Y[i], real, codes, cfg, noise_var=noise_variance(5.0))
        np.testing.assert_array_equal(batched[i], single)


def test_sequential_agrees_with_oracle_noiseless():
    cfg = FrameConfig(Mq=16, N_C=4)
    for f in range(100):
        rng = frame_rng(5, f, 0)
        real = realize(sample_paths(cfg, rng), cfg)
        bits = rng.integers(0, 2, bits_per_frame(cfg), dtype=np.int8)
        _, codes, Y = transmit(cfg, bits, real, math.inf)
        dec, _ = detect_frame(Y, real, codes, cfg)
        ora = joint_ml_oracle(Y, real, codes, cfg)
        for name in ("c_re", "c_im", "label"):
            np.testing.assert_array_equal(getattr(dec, name), getattr(ora, name))


def test_index_error_rate_at_20db():
    # threshold 1%; a pilot run of this exact loop saw no index errors in 8e4 decisions
    cfg = FrameConfig(N_C=4)
    codes = generate_wh(cfg.L, cfg.N_C)
    errors = total = 0
    for f in range(0, 10_000, 500):
        rng = np.random.default_rng([77, f])
        reals = [sample_paths(cfg, rng) for _ in range(500)]
        paths = PathSet(np.stack([p.gains for p in reals]), reals[0].delays,
                        np.stack([p.doppler for p in reals]))
        real = realize(paths, cfg)
        bits = rng.integers(0, 2, (500, bits_per_frame(cfg)), dtype=np.int8)
        frame, _, Y = transmit(cfg, bits, real, 20.0, rng)
        dec, _ = detect_frame(Y, real, codes, cfg, noise_var=noise_variance(20.0))
        errors += np.count_nonzero(dec.c_re != frame.c_re) + np.count_nonzero(dec.c_im != frame.c_im)
        total += 2 * frame.c_re.size
    rate = errors / total
    print(f"index error rate {rate:.2e}")
    assert rate < 0.01


def test_column_sic_refinement_never_raises_cost():
    rng = np.random.default_rng(4)
    B, NT, D, NM = 50, 4, 8, 4
    points = build_constellation(16).points
    H = (rng.standard_normal((B, NT, D, NM)) + 1j * rng.standard_normal((B, NT, D, NM))) / 2
    cols = np.moveaxis(H, -1, 1)
    ant = rng.integers(0, NT, (B, NM))
    lab = rng.integers(0, 16, (B, NM))
    b = np.arange(B)[:, None]
    y = np.einsum("bv,bvd->bd", points[lab], cols[b, np.arange(NM), ant])
    y = y + 0.3 * (rng.standard_normal((B, D)) + 1j * rng.standard_normal((B, D)))

    def cost(a, l):
        return np.sum(np.abs(y - np.einsum("bv,bvd->bd", points[l], cols[b, np.arange(NM), a])) ** 2, axis=1)

    a0, l0 = np.zeros((B, NM), int), np.zeros((B, NM), int)
    before = cost(a0, l0)
    refine_column_decisions(y, cols, points, a0, l0, max_sweeps=20)
    assert np.all(cost(a0, l0) <= before + 1e-9)
    a1, l1 = column_sic(y, H, points, 0.09)
    assert np.all((a1 >= 0) & (a1 < NT) & (l1 >= 0) & (l1 < 16))
