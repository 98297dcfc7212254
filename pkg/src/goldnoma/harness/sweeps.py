"""Monte Carlo experiment drivers: SER vs SNR across code lengths, the
spread-vs-unspread baseline comparison, paired raw-vs-refined estimation
MSE, and the user-scaling study with code reuse."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..channel import UserProfile, db_to_linear, sample_block_fading
from ..estimation import ExternalPredictor, cpf_refine, despread_estimate, \
    weighted_subcarrier_selection
from ..gold_codes import assign_codes, family_matrix, generate_gold_family
from ..phy import FrameSpec, allocate_power, build_frame, receive, sic_detect
from .config import ScenarioConfig
from .results import AGGREGATE_USER, SweepResult, SweepRow, mean_stderr, ser_stderr
from .seeding import PURPOSE_CHANNEL, PURPOSE_CODES, PURPOSE_NOISE, \
    PURPOSE_SYMBOLS, trial_rng


@lru_cache(maxsize=8)
def cached_family_matrix(m: int) -> np.ndarray:
    """Validated Gold family as a read-only [family_size, L] float matrix."""
    mat = family_matrix(generate_gold_family(m))
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class TrialRecord:
    """Everything one two-user frame contributes to sweep statistics."""
    errors: np.ndarray    # [2] symbol error counts under final-estimate SIC
    n_symbols: int        # data symbols per user in this frame
    sq_err_raw: np.ndarray    # [2] |h_raw - h|^2
    sq_err_final: np.ndarray  # [2] |h_final - h|^2


def run_two_user_trial(cfg: ScenarioConfig, snr_db: float, trial: int, *,
                       m: int | None = None, spread: bool = True,
                       refine: str | None = None) -> TrialRecord:
    """One frame of the two-user downlink scenario.

    The per-subcarrier transmit power is snr_lin * N0 (transmit SNR axis);
    large-scale gain is expressed relative to cfg.reference_distance_m.
    ``spread=False`` replaces every signature with all-ones chips (the
    unspread pilot-only baseline); ``refine`` overrides cfg.cpf_strategy.
    """
    m = cfg.code_length_m if m is None else m
    strategy = cfg.cpf_strategy if refine is None else refine
    fam = cached_family_matrix(m)
    n_fam, L = fam.shape
    spec = cfg.frame_spec()
    if spec.n_users != 2:
        raise ValueError("the two-user drivers need n_users=2")
    n0_ref = cfg.noise_power_w()
    noise_w = 0.0 if cfg.noiseless else n0_ref
    profiles = cfg.two_user_profiles()
    p_total = db_to_linear(snr_db) * n0_ref * spec.n_subcarriers
    alloc = allocate_power(profiles, p_total, spec.n_subcarriers,
                           mode=cfg.allocation, share_cap=cfg.share_cap)

    rng_ch = trial_rng(cfg.master_seed, trial, PURPOSE_CHANNEL)
    rng_co = trial_rng(cfg.master_seed, trial, PURPOSE_CODES)
    rng_sy = trial_rng(cfg.master_seed, trial, PURPOSE_SYMBOLS)
    rng_no = trial_rng(cfg.master_seed, trial, PURPOSE_NOISE)

    chan = sample_block_fading(profiles, rng_ch,
                               shadowing_sigma_db=cfg.shadowing_sigma_db,
                               reference_m=cfg.reference_distance_m)
    if spread:
        # fresh code pair and independent cyclic chip phases per trial
        # (asynchronous arrivals exercise the full correlation profile)
        first = int(rng_co.integers(0, n_fam))
        second = int(rng_co.integers(0, n_fam - 1))
        if second >= first:
            second += 1
        offsets = rng_co.integers(0, L, size=2)
        codes = np.stack([np.roll(fam[first], -int(offsets[0])),
                          np.roll(fam[second], -int(offsets[1]))])
    else:
        codes = np.ones((2, L))
    symbols = rng_sy.choice(np.array([-1.0, 1.0]), size=(2, spec.n_data))
    frame = build_frame(spec, alloc, symbols, codes)
    observations = receive(frame, chan, noise_w, rng_no)
    h_true = chan.composite_gain

    if cfg.perfect_csi:
        h_raw = h_true.astype(np.complex128).copy()
    else:
        h_raw = np.array([
            despread_estimate(observations[u].y_pilot, codes[u],
                              pilot_power=alloc.phi[u, 0],
                              pilot_symbol=spec.pilot_symbol)
            for u in range(2)], dtype=np.complex128)

    detections = [sic_detect(observations[u], codes, alloc, h_raw, trial_index=trial)
                  for u in range(2)]

    if strategy == "baseline" and not cfg.perfect_csi:
        data_phi = alloc.phi[:, spec.n_pilot:]
        selected = weighted_subcarrier_selection(data_phi[0], data_phi[1],
                                                 cfg.selection_config())
        h_final = np.array([
            cpf_refine(h_raw[u], data_phi[u], detections[u].own(), "baseline",
                       selected=selected, code_length=L, noise_power_w=noise_w,
                       reliability_threshold=cfg.reliability_threshold,
                       trial=trial).h_final
            for u in range(2)], dtype=np.complex128)
        detections = [sic_detect(observations[u], codes, alloc, h_final, trial_index=trial)
                      for u in range(2)]
    else:
        h_final = h_raw

    errors = np.array([
        int(np.sum(detections[u].own().symbols != symbols[u])) for u in range(2)])
    return TrialRecord(errors=errors, n_symbols=spec.n_data,
                       sq_err_raw=np.abs(h_raw - h_true) ** 2,
                       sq_err_final=np.abs(h_final - h_true) ** 2)


def _ser_rows(snr_db: float, metric: str, errors: np.ndarray, n_symbols: int,
              trials: int) -> list[SweepRow]:
    rows = []
    per_user = errors / (trials * n_symbols)
    for u in range(errors.shape[0]):
        rows.append(SweepRow(axis=snr_db, user_id=u, metric=metric,
                             value=float(per_user[u]),
                             stderr=ser_stderr(float(per_user[u]), trials),
                             trials=trials))
    agg = float(errors.sum() / (errors.shape[0] * trials * n_symbols))
    rows.append(SweepRow(axis=snr_db, user_id=AGGREGATE_USER, metric=metric,
                         value=agg, stderr=ser_stderr(agg, trials), trials=trials))
    return rows


def run_ser_sweep(cfg: ScenarioConfig, code_lengths: tuple[int, ...] | None = None
                  ) -> SweepResult:
    """SER vs transmit SNR for each requested code length (final-estimate
    SIC detection).  Channel/symbol/noise realizations are paired across
    SNR points and code lengths through purpose-keyed trial streams."""
    lengths = tuple(sorted(set(code_lengths or (5, 6, 7))))
    axis = cfg.snr_axis()
    rows: list[SweepRow] = []
    for m in lengths:
        metric = f"ser_L{2 ** m - 1}"
        for snr_db in axis:
            errors = np.zeros(2, dtype=np.int64)
            n_symbols = 0
            for t in range(cfg.trials):
                rec = run_two_user_trial(cfg, snr_db, t, m=m)
                errors += rec.errors
                n_symbols = rec.n_symbols
            rows.extend(_ser_rows(snr_db, metric, errors, n_symbols, cfg.trials))
    return SweepResult(name="ser_sweep", rows=rows, config=cfg,
                       metadata={"code_lengths": list(lengths), "snr_db": axis})


def baseline_axis(cfg: ScenarioConfig) -> list[float]:
    """The comparison sweep's default grid runs -20..0 dB (the low-SNR
    region where spreading is decisive), stepped by cfg.snr_step_db."""
    count = int(math.floor(20.0 / cfg.snr_step_db + 1e-9)) + 1
    return [-20.0 + i * cfg.snr_step_db for i in range(count)]


def run_baseline_comparison(cfg: ScenarioConfig,
                            snr_db: list[float] | None = None) -> SweepResult:
    """Gold-spread system vs the unspread pilot-only baseline on paired
    realizations (identical channels, symbols, and noise per trial)."""
    axis = list(snr_db) if snr_db is not None else baseline_axis(cfg)
    rows: list[SweepRow] = []
    for point in axis:
        err_gold = np.zeros(2, dtype=np.int64)
        err_base = np.zeros(2, dtype=np.int64)
        n_symbols = 0
        for t in range(cfg.trials):
            rec_g = run_two_user_trial(cfg, point, t, spread=True)
            rec_b = run_two_user_trial(cfg, point, t, spread=False, refine="none")
            err_gold += rec_g.errors
            err_base += rec_b.errors
            n_symbols = rec_g.n_symbols
        rows.extend(_ser_rows(point, "ser_gold", err_gold, n_symbols, cfg.trials))
        rows.extend(_ser_rows(point, "ser_baseline", err_base, n_symbols, cfg.trials))
    return SweepResult(name="baseline_compare", rows=rows, config=cfg,
                       metadata={"snr_db": axis})


def _mse_rows(axis_value: float, samples: dict[str, np.ndarray], trials: int
              ) -> list[SweepRow]:
    """Emit per-user and aggregate mean rows for each named per-trial
    squared-error matrix of shape [trials, n_users]."""
    rows: list[SweepRow] = []
    for metric, mat in samples.items():
        for u in range(mat.shape[1]):
            mean, se = mean_stderr(mat[:, u])
            rows.append(SweepRow(axis=axis_value, user_id=u, metric=metric,
                                 value=mean, stderr=se, trials=trials))
        mean, se = mean_stderr(mat.mean(axis=1))
        rows.append(SweepRow(axis=axis_value, user_id=AGGREGATE_USER, metric=metric,
                             value=mean, stderr=se, trials=trials))
    return rows


def run_cpf_eval(cfg: ScenarioConfig, prediction_file: str | Path | None = None,
                 snr_db: list[float] | None = None) -> SweepResult:
    """Raw vs refined estimation MSE.

    Without a prediction file, runs the two-user scenario per SNR point and
    reports mse_raw, mse_final, and their paired per-trial difference
    mse_delta.  With a prediction file, evaluates the external predictor
    against the regenerated temporal series (see harness.dataset).
    """
    if prediction_file is not None:
        from .dataset import evaluate_external_predictions
        predictor = ExternalPredictor.from_file(prediction_file)
        return evaluate_external_predictions(cfg, predictor)
    axis = list(snr_db) if snr_db is not None else cfg.snr_axis()
    rows: list[SweepRow] = []
    for point in axis:
        raw = np.zeros((cfg.trials, 2))
        fin = np.zeros((cfg.trials, 2))
        for t in range(cfg.trials):
            rec = run_two_user_trial(cfg, point, t)
            raw[t] = rec.sq_err_raw
            fin[t] = rec.sq_err_final
        rows.extend(_mse_rows(point, {"mse_raw": raw, "mse_final": fin,
                                      "mse_delta": fin - raw}, cfg.trials))
    return SweepResult(name="cpf_eval", rows=rows, config=cfg,
                       metadata={"snr_db": axis, "strategy": cfg.cpf_strategy})


DEFAULT_USER_COUNTS = (2, 40, 50, 60, 70, 80, 90, 100)


def run_mse_scaling(cfg: ScenarioConfig, user_counts: tuple[int, ...] | None = None,
                    snr_db: float = 20.0) -> SweepResult:
    """Matched-filter estimation MSE as the user count grows past the
    31-chip family size and codes are reused round-robin.

    All users sit at the reference distance with shadowing disabled and an
    equal share of the per-slot budget, so the trend isolates code-reuse
    interference.  Codes are chip-synchronous: reused sequences collide
    head-on, which is the worst case the study describes.  Each estimate
    averages ``cfg.mf_slots`` known-symbol sounding slots.
    """
    counts = tuple(user_counts) if user_counts is not None else DEFAULT_USER_COUNTS
    if any(n < 2 or n > 128 for n in counts):
        raise ValueError("user counts must lie in [2, 128]")
    fam = cached_family_matrix(5)  # the study is defined on the 31-chip family
    n_fam, L = fam.shape
    n0_ref = cfg.noise_power_w()
    noise_w = 0.0 if cfg.noiseless else n0_ref
    p_slot = db_to_linear(snr_db) * n0_ref
    rows: list[SweepRow] = []
    for n_users in counts:
        assignment = assign_codes(fam, n_users)
        codes = fam[list(assignment.indices)]          # [n_users, L]
        phi = p_slot / n_users                         # equal split per slot
        amp = math.sqrt(phi / L)
        scale = math.sqrt(phi * L)
        agg = np.zeros(cfg.trials)
        for t in range(cfg.trials):
            rng_ch = trial_rng(cfg.master_seed, t, PURPOSE_CHANNEL)
            rng_sy = trial_rng(cfg.master_seed, t, PURPOSE_SYMBOLS)
            rng_no = trial_rng(cfg.master_seed, t, PURPOSE_NOISE)
            h = (rng_ch.standard_normal(n_users)
                 + 1j * rng_ch.standard_normal(n_users)) / math.sqrt(2.0)
            sym = rng_sy.choice(np.array([-1.0, 1.0]), size=(n_users, cfg.mf_slots))
            y = np.einsum("n,ns,nl->sl", amp * h, sym, codes)
            if noise_w > 0.0:
                y = y + math.sqrt(noise_w / 2.0) * (
                    rng_no.standard_normal(y.shape)
                    + 1j * rng_no.standard_normal(y.shape))
            # per-slot matched filter, then symbol-removed averaging
            stat = np.einsum("sl,nl->ns", y, codes) / scale
            h_hat = (stat * sym).mean(axis=1)
            agg[t] = float(np.mean(np.abs(h_hat - h) ** 2))
        mean, se = mean_stderr(agg)
        rows.append(SweepRow(axis=float(n_users), user_id=AGGREGATE_USER,
                             metric="mse_mf", value=mean, stderr=se,
                             trials=cfg.trials))
        rows.append(SweepRow(axis=float(n_users), user_id=AGGREGATE_USER,
                             metric="reuse_factor",
                             value=float(math.ceil(n_users / n_fam)),
                             stderr=0.0, trials=cfg.trials))
    return SweepResult(name="mse_scaling", rows=rows, config=cfg,
                       metadata={"user_counts": list(counts), "snr_db": snr_db,
                                 "mf_slots": cfg.mf_slots, "code_length": L})
