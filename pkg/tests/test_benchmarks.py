import math

import numpy as np
import pytest

from otfs_cim.benchmarks import (demap_sm, map_sm, otfs_sm_transceive, otfs_transceive,
                                 sm_cells, sm_payload_bits)
from otfs_cim.channel import draw_unit_noise, frame_rng, realize, sample_paths
from otfs_cim.config import FrameConfig, spectral_efficiency, validate
from otfs_cim.harness import simulate_chunk


def otfs_bits(cfg):
    return cfg.N * cfg.M * int(math.log2(cfg.Mq))


def test_payload_sizes():
    assert otfs_bits(FrameConfig(Mq=64)) == 24
    assert sm_payload_bits(FrameConfig(Mq=16, N_T=4)) == 24
    assert sm_payload_bits(FrameConfig(Mq=32, N_T=8, L=16)) == 32
    for kw in (dict(Mq=16, N_T=4), dict(Mq=32, N_T=8)):
        cfg = FrameConfig(**kw)
        assert sm_payload_bits(cfg) == spectral_efficiency("otfs-sm", cfg)


def test_sm_mapping_roundtrip_and_fields():
    cfg = FrameConfig(Mq=16, N_T=4)
    rng = np.random.default_rng(0)
    p = rng.integers(0, 2, (20, 24), dtype=np.int8)
    ant, lab = map_sm(p, cfg)
    np.testing.assert_array_equal(demap_sm(ant, lab, cfg), p)
    bits = np.array([1, 0, 0, 0, 1, 1] + [0] * 18, dtype=np.int8)
    cell = sm_cells(bits, cfg)[0][0]
    assert cell.antenna_index == 3
    with pytest.raises(ValueError):
        map_sm(bits[:-1], cfg)


def channels(cfg, seed, n):
    rng = np.random.default_rng(seed)
    return [realize(sample_paths(cfg, rng), cfg) for _ in range(n)]


@pytest.mark.parametrize("kw", [dict(Mq=64), dict(Mq=16, N=3, M=3), dict(Mq=8, N_R=1, P=2)])
def test_otfs_noiseless(kw):
    cfg = validate(FrameConfig(**kw), allow_cross=True)
    for seed in range(10):
        (real,) = channels(cfg, seed, 1)
        bits = np.random.default_rng(seed).integers(0, 2, otfs_bits(cfg), dtype=np.int8)
        np.testing.assert_array_equal(otfs_transceive(bits, cfg, real, math.inf), bits)


@pytest.mark.parametrize("kw", [dict(Mq=16, N_T=4, N_R=4), dict(Mq=4, N_T=2, N_R=2),
                                dict(Mq=32, N_T=8, N_R=8)])
def test_sm_noiseless(kw):
    cfg = validate(FrameConfig(**kw), allow_cross=True)
    for seed in range(10):
        reals = channels(cfg, seed, cfg.N_T)
        bits = np.random.default_rng(seed).integers(0, 2, sm_payload_bits(cfg), dtype=np.int8)
        np.testing.assert_array_equal(otfs_sm_transceive(bits, cfg, reals, math.inf), bits)


def test_sm_single_antenna_equals_otfs():
    cfg = FrameConfig(Mq=16, N_T=1)
    for seed in range(10):
        (real,) = channels(cfg, seed, 1)
        rng = frame_rng(seed, 0, 1)
        bits = rng.integers(0, 2, (4, otfs_bits(cfg)), dtype=np.int8)
        noise = draw_unit_noise(rng, (4, cfg.N_R * cfg.N * cfg.M))
        a = otfs_transceive(bits, cfg, real, 3.0, noise=noise)
        b = otfs_sm_transceive(bits, cfg, [real], 3.0, noise=noise)
        np.testing.assert_array_equal(a, b)


def test_sm_argument_errors():
    cfg = FrameConfig(Mq=16, N_T=4)
    bits = np.zeros(24, dtype=np.int8)
    with pytest.raises(ValueError):
        otfs_sm_transceive(bits, cfg, channels(cfg, 0, 2), math.inf)
    with pytest.raises(ValueError):
        otfs_sm_transceive(bits, FrameConfig(Mq=16, N_T=3), channels(cfg, 0, 3), math.inf)
    with pytest.raises(ValueError):
        otfs_transceive(bits[:-1], FrameConfig(Mq=64), channels(cfg, 0, 1)[0], math.inf)


@pytest.mark.parametrize("system, kw", [("otfs", dict(Mq=64, N_C=1)),
                                        ("otfs-sm", dict(Mq=16, N_T=4, N_C=1))])
def test_benchmark_ber_falls_with_snr(system, kw):
    cfg = FrameConfig(**kw)
    n0, e0 = simulate_chunk(system, cfg, 3, 0, 2000, 0.0)
    n1, e1 = simulate_chunk(system, cfg, 3, 0, 2000, 15.0)
    p0, p1 = e0 / n0, e1 / n1
    ci = 1.96 * math.sqrt(p0 * (1 - p0) / n0) + 1.96 * math.sqrt(p1 * (1 - p1) / n1)
    assert p0 - p1 > ci
