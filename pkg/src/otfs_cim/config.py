"""Frame/system configuration, validation and bit budgets."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

SPEED_OF_LIGHT = 2.99792458e8  # m/s

SYSTEMS = ("otfs-cim", "otfs", "otfs-sm")


class ConfigError(ValueError):
    """Raised when a FrameConfig violates one of its invariants.

    ``field`` names the offending parameter.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _is_pow2(x: int) -> bool:
    return isinstance(x, int) and x >= 1 and (x & (x - 1)) == 0


def is_square_qam(Mq: int) -> bool:
    root = math.isqrt(Mq)
    return root * root == Mq


@dataclass(frozen=True)
class FrameConfig:
    """All parameters of one OTFS-CIM (or benchmark) link.

    Attributes
    ----------
    N, M : int
        Doppler bins (time slots) and delay bins (subcarriers).
    Mq : int
        QAM order.
    N_C, L : int
        Number of Walsh-Hadamard codes and chips per code.
    N_R, N_T : int
        Receive antennas; transmit antennas (only used by OTFS-SM).
    carrier_hz, delta_f_hz, speed_kmh : float
        Carrier frequency, subcarrier spacing and maximum mobile speed.
    P : int
        Number of channel taps.
    """

    N: int = 2
    M: int = 2
    Mq: int = 4
    N_C: int = 2
    L: int = 8
    N_R: int = 4
    N_T: int = 1
    carrier_hz: float = 4e9
    delta_f_hz: float = 15e3
    speed_kmh: float = 506.2
    P: int = 4

    @property
    def grid_size(self) -> int:
        return self.N * self.M

    @property
    def rx_dim(self) -> int:
        return self.N_R * self.N * self.M

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FrameConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], f"unknown config key(s) {unknown}")
        return cls(**data)


@dataclass(frozen=True)
class TimingDerived:
    T_c: float
    T_s: float
    frame_duration: float
    max_doppler_hz: float


def validate(cfg: FrameConfig, *, allow_cross: bool = False) -> FrameConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError.

    Non-square QAM orders (8, 32, ...) are rejected unless ``allow_cross``
    is set, in which case they are realized as rectangular/cross
    constellations.
    """
    for name in ("N", "M", "N_R", "N_T", "P", "L", "N_C", "Mq"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(name, f"must be an integer, got {value!r}")
    for name in ("N", "M", "N_R", "N_T", "P"):
        if getattr(cfg, name) < 1:
            raise ConfigError(name, "must be >= 1")
    # taps are sample delays over the N*M-sample frame
    if cfg.P > cfg.N * cfg.M:
        raise ConfigError("P", f"P={cfg.P} exceeds the N*M={cfg.N * cfg.M} samples of a frame")
    if not _is_pow2(cfg.Mq) or cfg.Mq < 4:
        raise ConfigError("Mq", f"Mq={cfg.Mq} must be a power of two >= 4")
    if not allow_cross and not is_square_qam(cfg.Mq):
        raise ConfigError("Mq", f"Mq not square QAM (Mq={cfg.Mq})")
    if not _is_pow2(cfg.L):
        raise ConfigError("L", f"L={cfg.L} is not a power of two")
    if cfg.N_C > cfg.L:
        raise ConfigError("N_C", f"N_C exceeds L ({cfg.N_C} > {cfg.L})")
    if not _is_pow2(cfg.N_C):
        raise ConfigError("N_C", f"N_C={cfg.N_C} is not a power of two")
    if not _is_pow2(cfg.N_T):
        raise ConfigError("N_T", f"N_T={cfg.N_T} is not a power of two")
    if not cfg.delta_f_hz > 0:
        raise ConfigError("delta_f_hz", "subcarrier spacing must be positive")
    if not cfg.carrier_hz > 0:
        raise ConfigError("carrier_hz", "carrier frequency must be positive")
    if not cfg.speed_kmh >= 0:
        raise ConfigError("speed_kmh", "speed must be non-negative")
    return cfg


def load_config(path, *, allow_cross: bool = False) -> FrameConfig:
    """Read a FrameConfig from a JSON document; unknown keys are rejected."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config JSON must be an object")
    return validate(FrameConfig.from_dict(data), allow_cross=allow_cross)


def cell_bits(cfg: FrameConfig) -> int:
    return int(math.log2(cfg.Mq)) + 2 * int(math.log2(cfg.N_C))


def bits_per_frame(cfg: FrameConfig) -> int:
    return cfg.N * cfg.M * cell_bits(cfg)


def spectral_efficiency(system: str, cfg: FrameConfig) -> int:
    """Bits per channel use carried by one N x M frame of ``system``."""
    nm = cfg.N * cfg.M
    q = int(math.log2(cfg.Mq))
    if system == "otfs-cim":
        return bits_per_frame(cfg)
    if system == "otfs":
        return nm * q
    if system == "otfs-sm":
        if not _is_pow2(cfg.N_T):
            raise ConfigError("N_T", f"N_T={cfg.N_T} is not a power of two")
        return nm * (q + int(math.log2(cfg.N_T)))
    raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")


def timing(cfg: FrameConfig) -> TimingDerived:
    T_c = 1.0 / cfg.delta_f_hz
    T_s = cfg.L * T_c
    speed_ms = cfg.speed_kmh / 3.6
    return TimingDerived(
        T_c=T_c,
        T_s=T_s,
        frame_duration=cfg.N * T_s,
        max_doppler_hz=speed_ms * cfg.carrier_hz / SPEED_OF_LIGHT,
    )


def max_doppler_index(cfg: FrameConfig) -> float:
    """Largest normalized Doppler index, f_d * N * T_s."""
    t = timing(cfg)
    return t.max_doppler_hz * t.frame_duration
