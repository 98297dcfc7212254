"""Temporal channel traces for training and scoring the external channel
predictor.

GPS trajectories are out of scope, so time structure is synthesized:
AR(1) small-scale fading, AR(1) log-normal shadowing, and bounded
random-walk user distances.  Each time step runs one minimal two-user
frame (one pilot + one data subcarrier) through the full transmit/receive
pipeline, so the exported features are exactly what a receiver observes:
raw despread estimate, allocated power, and detected symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..channel import ChannelRealization, UserProfile, db_to_linear, path_loss_linear
from ..estimation import ExternalPredictor, despread_estimate
from ..phy import FrameSpec, allocate_power, build_frame, receive, sic_detect
from .config import ScenarioConfig, config_dict, with_overrides
from .results import AGGREGATE_USER, SweepResult, SweepRow, mean_stderr, write_artifact
from .seeding import PURPOSE_CHANNEL, PURPOSE_CODES, PURPOSE_NOISE, \
    PURPOSE_SYMBOLS, PURPOSE_WALK, trial_rng
from .sweeps import cached_family_matrix

DATASET_COLUMNS = ("time_step", "user_id", "h_real", "h_imag", "phi",
                   "x_hat_real", "x_hat_imag", "h_raw_real", "h_raw_imag")


@dataclass(frozen=True)
class TemporalSeries:
    h_true: np.ndarray  # [T, n_users] composite channel gains
    phi: np.ndarray     # [T, n_users] per-subcarrier allocated power (W)
    x_hat: np.ndarray   # [T, n_users] detected data symbol (complex)
    h_raw: np.ndarray   # [T, n_users] raw despread estimates

    @property
    def n_steps(self) -> int:
        return self.h_true.shape[0]

    @property
    def n_users(self) -> int:
        return self.h_true.shape[1]


def simulate_temporal_series(cfg: ScenarioConfig) -> TemporalSeries:
    """Deterministic two-user time series at cfg.export_snr_db.

    Per step: advance the AR(1)/random-walk state, then run one
    single-pilot single-data frame and record (true gain, power share,
    detected symbol, raw estimate) per user.
    """
    n_steps = cfg.export_points
    fam = cached_family_matrix(cfg.code_length_m)
    n_fam, L = fam.shape
    spec = FrameSpec(n_subcarriers=2, pilot_fraction=0.5, n_users=2)
    n0_ref = cfg.noise_power_w()
    noise_w = 0.0 if cfg.noiseless else n0_ref
    p_total = float(db_to_linear(cfg.export_snr_db)) * n0_ref * spec.n_subcarriers
    a = cfg.fading_ar_coeff
    b = cfg.shadowing_ar_coeff
    sigma_sh = cfg.export_shadowing_sigma_db
    d_lo, d_hi = cfg.min_distance_m, 2.0 * cfg.distance_far_m

    h_state = np.zeros(2, dtype=np.complex128)
    sh_state = np.zeros(2)
    dist = np.array([cfg.distance_near_m, cfg.distance_far_m])

    out_h = np.zeros((n_steps, 2), dtype=np.complex128)
    out_phi = np.zeros((n_steps, 2))
    out_xhat = np.zeros((n_steps, 2), dtype=np.complex128)
    out_raw = np.zeros((n_steps, 2), dtype=np.complex128)

    for t in range(n_steps):
        rng_ch = trial_rng(cfg.master_seed, t, PURPOSE_CHANNEL)
        rng_walk = trial_rng(cfg.master_seed, t, PURPOSE_WALK)
        rng_co = trial_rng(cfg.master_seed, t, PURPOSE_CODES)
        rng_sy = trial_rng(cfg.master_seed, t, PURPOSE_SYMBOLS)
        rng_no = trial_rng(cfg.master_seed, t, PURPOSE_NOISE)

        w = (rng_ch.standard_normal(2) + 1j * rng_ch.standard_normal(2)) / np.sqrt(2.0)
        eps = rng_ch.standard_normal(2) * sigma_sh
        if t == 0:
            h_state = w
            sh_state = eps
        else:
            h_state = a * h_state + np.sqrt(1.0 - a * a) * w
            sh_state = b * sh_state + np.sqrt(1.0 - b * b) * eps
            dist = np.clip(dist + rng_walk.uniform(-cfg.walk_step_m, cfg.walk_step_m, 2),
                           d_lo, d_hi)

        profiles = [
            UserProfile(user_id=0, distance_m=float(dist[0]),
                        path_loss_exponent=cfg.path_loss_exponent, role="near"),
            UserProfile(user_id=1, distance_m=float(dist[1]),
                        path_loss_exponent=cfg.path_loss_exponent, role="far"),
        ]
        pl = path_loss_linear(dist, cfg.path_loss_exponent,
                              reference_m=cfg.reference_distance_m)
        gain = h_state * np.sqrt(pl * 10.0 ** (sh_state / 10.0))
        chan = ChannelRealization(h=h_state.copy(), shadowing_db=sh_state.copy(),
                                  path_loss_linear=pl, composite_gain=gain)
        alloc = allocate_power(profiles, p_total, spec.n_subcarriers,
                               mode=cfg.allocation, share_cap=cfg.share_cap)
        first = int(rng_co.integers(0, n_fam))
        second = int(rng_co.integers(0, n_fam - 1))
        if second >= first:
            second += 1
        offsets = rng_co.integers(0, L, size=2)
        codes = np.stack([np.roll(fam[first], -int(offsets[0])),
                          np.roll(fam[second], -int(offsets[1]))])
        symbols = rng_sy.choice(np.array([-1.0, 1.0]), size=(2, spec.n_data))
        frame = build_frame(spec, alloc, symbols, codes)
        observations = receive(frame, chan, noise_w, rng_no)
        for u in range(2):
            h_raw = despread_estimate(observations[u].y_pilot, codes[u],
                                      pilot_power=alloc.phi[u, 0],
                                      pilot_symbol=spec.pilot_symbol)
            det = sic_detect(observations[u], codes, alloc,
                             np.array([h_raw, h_raw]), trial_index=t)
            out_raw[t, u] = h_raw
            out_xhat[t, u] = complex(det.own().symbols[0])
            out_phi[t, u] = alloc.phi[u, 0]
        out_h[t] = gain
    return TemporalSeries(h_true=out_h, phi=out_phi, x_hat=out_xhat, h_raw=out_raw)


def dataset_csv_text(series: TemporalSeries) -> str:
    lines = [",".join(DATASET_COLUMNS)]
    for t in range(series.n_steps):
        for u in range(series.n_users):
            lines.append(",".join((
                str(t), str(u),
                repr(float(series.h_true[t, u].real)),
                repr(float(series.h_true[t, u].imag)),
                repr(float(series.phi[t, u])),
                repr(float(series.x_hat[t, u].real)),
                repr(float(series.x_hat[t, u].imag)),
                repr(float(series.h_raw[t, u].real)),
                repr(float(series.h_raw[t, u].imag)),
            )))
    return "\n".join(lines) + "\n"


def dataset_artifact(cfg: ScenarioConfig) -> tuple[str, dict]:
    """Render the temporal trace as (csv_text, sidecar) without touching disk."""
    series = simulate_temporal_series(cfg)
    valid_windows = cfg.export_points - cfg.export_window - cfg.export_horizon + 1
    sidecar = {
        "name": "training_dataset",
        "version": __version__,
        "fingerprint": cfg.fingerprint(),
        "columns": list(DATASET_COLUMNS),
        "config": config_dict(cfg),
        "metadata": {
            "n_points": cfg.export_points,
            "n_users": series.n_users,
            "rows": series.n_steps * series.n_users,
            "window": cfg.export_window,
            "horizon": cfg.export_horizon,
            "valid_windows_per_user": valid_windows,
            "snr_db": cfg.export_snr_db,
            "features": ["h_raw_real", "h_raw_imag", "phi", "x_hat_real", "x_hat_imag"],
            "target": ["h_real", "h_imag"],
        },
    }
    return dataset_csv_text(series), sidecar


def export_training_dataset(cfg: ScenarioConfig, out_path: str | Path,
                            n_points: int | None = None,
                            window: int | None = None,
                            horizon: int | None = None,
                            force: bool = False) -> Path:
    """Write the temporal trace as CSV plus a JSON sidecar with windowing
    metadata.  Explicit arguments overlay the config (and therefore the
    fingerprint).  Deterministic: same config + seed → byte-identical file.
    """
    overrides = {}
    if n_points is not None:
        overrides["export_points"] = n_points
    if window is not None:
        overrides["export_window"] = window
    if horizon is not None:
        overrides["export_horizon"] = horizon
    if overrides:
        cfg = with_overrides(cfg, **overrides)
    csv_text, sidecar = dataset_artifact(cfg)
    return write_artifact(out_path, csv_text, sidecar, force=force)


def evaluate_external_predictions(cfg: ScenarioConfig,
                                  predictor: ExternalPredictor) -> SweepResult:
    """Score an external predictor against the regenerated temporal series.

    Prediction rows are keyed (trial = time step, user).  Keys outside the
    exported range are rejected, reporting the first offending trial
    index.  Alongside mse_final (the predictions) the result carries
    mse_raw (despread estimates on the same steps) and mse_zero (the
    all-zero predictor) as reference points.
    """
    series = simulate_temporal_series(cfg)
    n_steps, n_users = series.n_steps, series.n_users
    keys = predictor.keys()
    for trial, user in keys:
        if not 0 <= trial < n_steps:
            raise ValueError(
                f"{predictor.path}: prediction trial {trial} does not align with the "
                f"exported series (valid time steps are 0..{n_steps - 1})")
        if not 0 <= user < n_users:
            raise ValueError(
                f"{predictor.path}: prediction for trial {trial} names unknown "
                f"user {user} (valid users are 0..{n_users - 1})")
    per_user: dict[int, dict[str, list[float]]] = {
        u: {"mse_final": [], "mse_raw": [], "mse_zero": []} for u in range(n_users)}
    for trial, user in keys:
        truth = series.h_true[trial, user]
        pred = predictor.lookup(trial, user)
        per_user[user]["mse_final"].append(abs(pred - truth) ** 2)
        per_user[user]["mse_raw"].append(abs(series.h_raw[trial, user] - truth) ** 2)
        per_user[user]["mse_zero"].append(abs(truth) ** 2)
    rows: list[SweepRow] = []
    axis = cfg.export_snr_db
    for metric in ("mse_raw", "mse_final", "mse_zero"):
        pooled: list[float] = []
        for u in range(n_users):
            vals = per_user[u][metric]
            pooled.extend(vals)
            if vals:
                mean, se = mean_stderr(vals)
                rows.append(SweepRow(axis=axis, user_id=u, metric=metric,
                                     value=mean, stderr=se, trials=len(vals)))
        mean, se = mean_stderr(pooled)
        rows.append(SweepRow(axis=axis, user_id=AGGREGATE_USER, metric=metric,
                             value=mean, stderr=se, trials=len(pooled)))
    return SweepResult(name="cpf_eval", rows=rows, config=cfg,
                       metadata={"strategy": "external",
                                 "prediction_file": str(predictor.path),
                                 "n_predictions": len(keys),
                                 "snr_db": axis})
