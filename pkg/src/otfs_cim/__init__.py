"""Link-level simulator for OTFS with code index modulation (OTFS-CIM)."""

from .analysis import energy_saving, energy_savings, throughput
from .benchmarks import otfs_sm_transceive, otfs_transceive
from .channel import (ChannelRealization, PathSet, apply_channel, build_time_matrix,
                      effective_channel, realize, sample_paths)
from .config import (ConfigError, FrameConfig, bits_per_frame, load_config, spectral_efficiency,
                     timing, validate)
from .detector import detect_frame, estimate_code_indices, joint_ml_oracle, ml_symbol
from .harness import BerRecord, SweepSpec, run_point, run_sweep
from .mapping import CimCell, DDFrame, build_constellation, demap_frame, map_bits
from .spreading import correlate, generate_wh, spread_cell, spread_frame
from .transforms import heisenberg, isfft, sfft, wigner

__all__ = [
    "BerRecord", "ChannelRealization", "CimCell", "ConfigError", "DDFrame", "FrameConfig",
    "PathSet", "SweepSpec", "apply_channel", "bits_per_frame", "build_constellation",
    "build_time_matrix", "correlate", "demap_frame", "detect_frame", "effective_channel",
    "energy_saving", "energy_savings", "estimate_code_indices", "generate_wh", "heisenberg",
    "isfft", "joint_ml_oracle", "load_config", "map_bits", "ml_symbol", "otfs_sm_transceive",
    "otfs_transceive", "realize", "run_point", "run_sweep", "sample_paths", "sfft",
    "spectral_efficiency", "spread_cell", "spread_frame", "throughput", "timing", "validate",
    "wigner",
]
