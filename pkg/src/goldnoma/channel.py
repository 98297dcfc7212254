"""Block-fading channel model: Rayleigh fading, power-law path loss,
log-normal shadowing, and thermal-noise utilities.

Per-user composite gain for one coherence block:

    g = h * sqrt(path_loss * 10^(shadowing_db / 10))

with h ~ CN(0, 1) and path_loss = (d / d_ref)^-alpha.  The reference
distance defaults to 1 m (pure d^-alpha); sweep scenarios pass their own
reference so the absolute link constant folds into transmit power.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, SeedSequence, or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    distance_m: float
    path_loss_exponent: float = 3.76
    code_index: int = 0
    role: str = "generic"  # near | far | generic

    def __post_init__(self):
        if self.distance_m < 10.0:
            raise ValueError(f"distance_m must be >= 10 (minimum BS-user distance), got {self.distance_m}")
        if self.path_loss_exponent < 0:
            raise ValueError("path_loss_exponent must be >= 0")
        if self.role not in ("near", "far", "generic"):
            raise ValueError(f"unknown role {self.role!r}")


def path_loss_linear(distance_m, exponent: float, reference_m: float = 1.0) -> np.ndarray:
    """(d / d_ref)^-alpha as a linear power gain."""
    d = np.asarray(distance_m, dtype=np.float64)
    return (d / reference_m) ** (-exponent)


def db_to_linear(db) -> np.ndarray:
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


def linear_to_db(lin) -> np.ndarray:
    return 10.0 * np.log10(np.asarray(lin, dtype=np.float64))


@dataclass(frozen=True)
class ChannelRealization:
    """One block-fading draw for a set of users.

    composite_gain is recomputable from the stored factors bit-for-bit:
    h * sqrt(path_loss_linear * 10^(shadowing_db/10)).
    """

    h: np.ndarray               # CN(0,1) small-scale coefficients
    shadowing_db: np.ndarray
    path_loss_linear: np.ndarray
    composite_gain: np.ndarray

    def recompute_gain(self) -> np.ndarray:
        return self.h * np.sqrt(self.path_loss_linear * db_to_linear(self.shadowing_db))


def sample_block_fading(profiles: Sequence[UserProfile], rng,
                        shadowing_sigma_db: float = 10.0,
                        reference_m: float = 1.0) -> ChannelRealization:
    """Draw one independent block realization for every profile."""
    rng = as_generator(rng)
    n = len(profiles)
    d = np.array([p.distance_m for p in profiles])
    alpha = np.array([p.path_loss_exponent for p in profiles])
    pl = (d / reference_m) ** (-alpha)
    shadow = rng.normal(0.0, shadowing_sigma_db, n) if shadowing_sigma_db > 0 else np.zeros(n)
    h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
    gain = h * np.sqrt(pl * db_to_linear(shadow))
    return ChannelRealization(h=h, shadowing_db=shadow, path_loss_linear=pl, composite_gain=gain)


@dataclass(frozen=True)
class NoiseSpec:
    psd_dbm_per_hz: float = -174.0
    bandwidth_hz: float = 5e6
    noise_figure_db: float = 7.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")

    @property
    def noise_power_dbm(self) -> float:
        return self.psd_dbm_per_hz + 10.0 * np.log10(self.bandwidth_hz) + self.noise_figure_db


def noise_power(spec: NoiseSpec) -> float:
    """Thermal noise power in watts for the occupied bandwidth."""
    return 10.0 ** ((spec.noise_power_dbm - 30.0) / 10.0)


def add_awgn(samples: np.ndarray, noise_power_w: float, rng) -> np.ndarray:
    """Add circular complex Gaussian noise with per-sample variance noise_power_w."""
    if noise_power_w < 0:
        raise ValueError("noise_power_w must be >= 0")
    samples = np.asarray(samples, dtype=np.complex128)
    if noise_power_w == 0.0:
        return samples.copy()
    rng = as_generator(rng)
    scale = np.sqrt(noise_power_w / 2.0)
    noise = rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape)
    return samples + scale * noise
