"""Scenario configuration: a flat, strictly parsed key=value schema covering
cell geometry, radio parameters, frame layout, estimator knobs, Monte Carlo
controls, and the temporal dataset generator.

Every key is documented with units and defaults in docs/config-schema.md.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .. import __version__
from ..channel import NoiseSpec, UserProfile, db_to_linear, noise_power
from ..estimation import REFINEMENT_STRATEGIES, SelectionConfig
from ..phy import FrameSpec

ALLOCATION_MODES = ("inverted", "literal")


@dataclass(frozen=True)
class ScenarioConfig:
    # cell geometry
    n_cells: int = 1
    min_distance_m: float = 10.0
    distance_near_m: float = 20.0
    distance_far_m: float = 50.0
    reference_distance_m: float = 100.0
    path_loss_exponent: float = 3.76
    shadowing_sigma_db: float = 10.0
    # radio
    carrier_frequency_hz: float = 2.0e9
    bandwidth_hz: float = 5.0e6
    max_power_dbm: float = 43.0
    noise_psd_dbm_per_hz: float = -174.0
    noise_figure_db: float = 7.0
    # frame and spreading
    n_users: int = 2
    n_subcarriers: int = 8
    pilot_fraction: float = 0.125
    code_length_m: int = 5
    allocation: str = "inverted"
    share_cap: float = 0.8
    # estimation
    cpf_strategy: str = "baseline"
    k_select: int = 4
    w_near: float = 0.3
    w_far: float = 0.7
    reliability_threshold: float = 0.7
    # Monte Carlo controls
    trials: int = 10000
    master_seed: int = 20260825
    snr_min_db: float = -15.0
    snr_max_db: float = 25.0
    snr_step_db: float = 5.0
    perfect_csi: bool = False
    noiseless: bool = False
    # user-scaling study
    mf_slots: int = 16
    # temporal dataset export
    export_snr_db: float = 10.0
    export_points: int = 11000
    export_window: int = 120
    export_horizon: int = 20
    export_shadowing_sigma_db: float = 8.0
    fading_ar_coeff: float = 0.995
    shadowing_ar_coeff: float = 0.999
    walk_step_m: float = 0.05

    def __post_init__(self):
        if self.n_cells != 1:
            raise ValueError("only single-cell scenarios are supported (n_cells=1)")
        if self.min_distance_m < 10.0:
            raise ValueError("min_distance_m must be >= 10 m")
        for name in ("distance_near_m", "distance_far_m"):
            if getattr(self, name) < self.min_distance_m:
                raise ValueError(f"{name} must be >= min_distance_m ({self.min_distance_m} m)")
        if self.distance_near_m > self.distance_far_m:
            raise ValueError("distance_near_m must be <= distance_far_m")
        if self.reference_distance_m <= 0:
            raise ValueError("reference_distance_m must be positive")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.shadowing_sigma_db < 0 or self.export_shadowing_sigma_db < 0:
            raise ValueError("shadowing sigmas must be >= 0 dB")
        if self.bandwidth_hz <= 0 or self.carrier_frequency_hz <= 0:
            raise ValueError("bandwidth_hz and carrier_frequency_hz must be positive")
        if self.code_length_m not in (5, 6, 7):
            raise ValueError("code_length_m must be one of 5, 6, 7")
        if self.allocation not in ALLOCATION_MODES:
            raise ValueError(f"allocation must be one of {ALLOCATION_MODES}")
        if self.cpf_strategy not in REFINEMENT_STRATEGIES:
            raise ValueError(f"cpf_strategy must be one of {REFINEMENT_STRATEGIES}")
        if not 0.0 < self.share_cap <= 1.0:
            raise ValueError("share_cap must be in (0, 1]")
        if not 0.0 <= self.w_near <= 1.0 or not 0.0 <= self.w_far <= 1.0:
            raise ValueError("w_near and w_far must be in [0, 1]")
        if self.reliability_threshold < 0:
            raise ValueError("reliability_threshold must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.snr_step_db <= 0:
            raise ValueError("snr_step_db must be positive")
        if self.snr_max_db < self.snr_min_db:
            raise ValueError("snr_max_db must be >= snr_min_db")
        if self.mf_slots < 1:
            raise ValueError("mf_slots must be >= 1")
        if self.export_points < self.export_window + self.export_horizon:
            raise ValueError("export_points must be >= export_window + export_horizon")
        if self.export_window < 1 or self.export_horizon < 1:
            raise ValueError("export_window and export_horizon must be >= 1")
        for name in ("fading_ar_coeff", "shadowing_ar_coeff"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1)")
        if self.walk_step_m < 0:
            raise ValueError("walk_step_m must be >= 0")
        # frame feasibility: constructing these raises on bad combinations
        spec = self.frame_spec()
        if self.k_select > spec.n_data:
            raise ValueError(
                f"k_select ({self.k_select}) exceeds data subcarriers ({spec.n_data})")
        # power budget sanity: the largest per-frame transmit power implied
        # by the SNR axis must stay under the configured ceiling
        top = max(self.snr_max_db, self.export_snr_db)
        p_total = db_to_linear(top) * self.noise_power_w() * self.n_subcarriers
        if p_total > db_to_linear(self.max_power_dbm - 30.0):
            raise ValueError(
                f"SNR axis implies {p_total:.3e} W per frame, above max_power_dbm")

    # --- derived helpers ---------------------------------------------------

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(psd_dbm_per_hz=self.noise_psd_dbm_per_hz,
                         bandwidth_hz=self.bandwidth_hz,
                         noise_figure_db=self.noise_figure_db)

    def noise_power_w(self) -> float:
        """Thermal reference noise power in watts.  Also the per-subcarrier
        power unit: transmit SNR gamma puts gamma * N0 on each subcarrier."""
        return noise_power(self.noise_spec())

    def snr_axis(self) -> list[float]:
        count = int(np.floor((self.snr_max_db - self.snr_min_db) / self.snr_step_db + 1e-9)) + 1
        return [self.snr_min_db + i * self.snr_step_db for i in range(count)]

    def frame_spec(self) -> FrameSpec:
        return FrameSpec(n_subcarriers=self.n_subcarriers,
                         pilot_fraction=self.pilot_fraction,
                         n_users=self.n_users)

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(w_near=self.w_near, w_far=self.w_far,
                               k_select=self.k_select)

    def two_user_profiles(self) -> list[UserProfile]:
        return [
            UserProfile(user_id=0, distance_m=self.distance_near_m,
                        path_loss_exponent=self.path_loss_exponent, role="near"),
            UserProfile(user_id=1, distance_m=self.distance_far_m,
                        path_loss_exponent=self.path_loss_exponent, role="far"),
        ]

    def fingerprint(self) -> str:
        text = canonical_text(self) + f"\nversion={__version__}\n"
        return hashlib.sha256(text.encode()).hexdigest()


_FIELD_TYPES: dict[str, type] = {
    f.name: type(getattr(ScenarioConfig(), f.name)) for f in fields(ScenarioConfig)
}

_TRUE_WORDS = {"true", "yes", "on", "1"}
_FALSE_WORDS = {"false", "no", "off", "0"}


def _coerce(key: str, raw: Any, where: str) -> Any:
    kind = _FIELD_TYPES[key]
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        word = str(raw).strip().lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise ValueError(f"{where}: {key} expects a boolean, got {raw!r}")
    try:
        if kind is int:
            if isinstance(raw, float) and raw != int(raw):
                raise ValueError("not an integer")
            return int(str(raw).strip()) if not isinstance(raw, (int, float)) else int(raw)
        if kind is float:
            return float(raw)
        return str(raw).strip()
    except (TypeError, ValueError):
        raise ValueError(f"{where}: {key} expects {kind.__name__}, got {raw!r}") from None


def value_text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_text(cfg: ScenarioConfig) -> str:
    return "\n".join(
        f"{f.name}={value_text(getattr(cfg, f.name))}" for f in sorted(fields(cfg), key=lambda f: f.name)
    )


def config_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}


def parse_config_text(text: str, source: str = "<config>") -> tuple[dict[str, Any], set[str]]:
    """Parse flat key=value lines into a validated override mapping.

    Strict: unknown keys, duplicate keys, and untypeable values are
    rejected with the offending line number.  '#' starts a comment; blank
    lines are skipped.
    """
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"{source}:{lineno}: expected key=value, got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ValueError(f"{source}:{lineno}: duplicate config key {key!r}")
        values[key] = _coerce(key, raw, f"{source}:{lineno}")
    return values, set(values)


def build_config(values: Mapping[str, Any], source: str = "<config>") -> ScenarioConfig:
    """Construct a ScenarioConfig from a flat mapping, strictly."""
    coerced: dict[str, Any] = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"{source}: unknown config key {key!r}")
        coerced[key] = _coerce(key, raw, source)
    return ScenarioConfig(**coerced)


def load_config(path: str | Path | None = None,
                overrides: Mapping[str, Any] | None = None
                ) -> tuple[ScenarioConfig, set[str]]:
    """Load a config file (optional) and apply overrides on top.

    Returns the config plus the set of keys that were explicitly provided
    (file or override) — sweep drivers use this to decide whether an
    axis default applies.
    """
    values: dict[str, Any] = {}
    provided: set[str] = set()
    if path is not None:
        p = Path(path)
        file_values, file_keys = parse_config_text(p.read_text(), source=str(p))
        values.update(file_values)
        provided |= file_keys
    if overrides:
        for key, raw in overrides.items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"<override>: unknown config key {key!r}")
            values[key] = _coerce(key, raw, "<override>")
            provided.add(key)
    return ScenarioConfig(**values), provided


def with_overrides(cfg: ScenarioConfig, **kwargs: Any) -> ScenarioConfig:
    return replace(cfg, **kwargs)
