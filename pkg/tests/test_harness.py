"""Scenario config, result serialization, seeding, Monte Carlo drivers,
and the temporal dataset exporter."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from goldnoma.estimation import ExternalPredictor, matched_filter_estimate
from goldnoma.gold_codes import assign_codes
from goldnoma.harness.config import (
    ScenarioConfig,
    build_config,
    canonical_text,
    config_dict,
    load_config,
    parse_config_text,
    value_text,
    with_overrides,
)
from goldnoma.harness.dataset import (
    DATASET_COLUMNS,
    dataset_artifact,
    dataset_csv_text,
    evaluate_external_predictions,
    export_training_dataset,
    simulate_temporal_series,
)
from goldnoma.harness.results import (
    AGGREGATE_USER,
    format_number,
    mean_stderr,
    ser_stderr,
    sidecar_path,
    write_artifact,
    write_result,
)
from goldnoma.harness.seeding import (
    PURPOSE_CHANNEL,
    PURPOSE_CODES,
    PURPOSE_NOISE,
    PURPOSE_SYMBOLS,
    PURPOSE_WALK,
    trial_rng,
)
from goldnoma.harness.sweeps import (
    DEFAULT_USER_COUNTS,
    baseline_axis,
    cached_family_matrix,
    run_baseline_comparison,
    run_cpf_eval,
    run_mse_scaling,
    run_ser_sweep,
    run_two_user_trial,
)

TINY = ScenarioConfig(trials=25, snr_min_db=0.0, snr_max_db=0.0)
EXPORT_SMALL = ScenarioConfig(export_points=30, export_window=10,
                              export_horizon=5)


# --- config ----------------------------------------------------------------


def test_default_config_shape():
    cfg = ScenarioConfig()
    assert cfg.trials == 10000
    assert cfg.snr_axis() == [-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0]
    assert cfg.frame_spec().n_data == 7
    # default export windowing leaves 10861 usable windows per user
    assert cfg.export_points - cfg.export_window - cfg.export_horizon + 1 == 10861


def test_noise_power_matches_the_link_budget():
    cfg = ScenarioConfig()
    dbm = -174.0 + 10.0 * math.log10(5e6) + 7.0
    assert dbm == pytest.approx(-100.0103, abs=1e-4)
    assert cfg.noise_power_w() == pytest.approx(10.0 ** ((dbm - 30.0) / 10.0),
                                                rel=1e-12)


def test_fingerprint_is_hex_and_tracks_every_field():
    base = ScenarioConfig()
    fp = base.fingerprint()
    assert len(fp) == 64 and set(fp) <= set("0123456789abcdef")
    assert ScenarioConfig().fingerprint() == fp
    variants = [
        {"trials": 9999},
        {"master_seed": 1},
        {"perfect_csi": True},
        {"noiseless": True},
        {"allocation": "literal"},
        {"cpf_strategy": "none"},
        {"code_length_m": 6},
        {"distance_near_m": 21.0},
        {"snr_step_db": 10.0},
        {"export_points": 10999},
        {"walk_step_m": 0.0},
    ]
    seen = {fp}
    for kwargs in variants:
        other = with_overrides(base, **kwargs).fingerprint()
        assert other not in seen, f"fingerprint ignored {kwargs}"
        seen.add(other)


def test_canonical_text_round_trips():
    cfg = ScenarioConfig(trials=17, perfect_csi=True, snr_step_db=2.5)
    values, provided = parse_config_text(canonical_text(cfg))
    assert provided == set(config_dict(cfg))
    assert build_config(values) == cfg


def test_value_text_renders_bools_and_floats():
    assert value_text(True) == "true"
    assert value_text(False) == "false"
    assert value_text(2.5) == "2.5"
    assert value_text(11000) == "11000"


def test_parse_config_text_reports_line_numbers():
    good = "trials = 12\n# comment\n\nnoiseless = yes\n"
    values, provided = parse_config_text(good, source="demo.cfg")
    assert values == {"trials": 12, "noiseless": True}
    assert provided == {"trials", "noiseless"}
    with pytest.raises(ValueError, match=r"demo\.cfg:2: unknown config key"):
        parse_config_text("trials=1\nbogus=2\n", source="demo.cfg")
    with pytest.raises(ValueError, match=r"demo\.cfg:3: duplicate config key"):
        parse_config_text("trials=1\n\ntrials=2\n", source="demo.cfg")
    with pytest.raises(ValueError, match=r"demo\.cfg:1: expected key=value"):
        parse_config_text("what is this\n", source="demo.cfg")
    with pytest.raises(ValueError, match="expects int"):
        parse_config_text("trials=2.5\n", source="demo.cfg")
    with pytest.raises(ValueError, match="boolean"):
        parse_config_text("noiseless=maybe\n", source="demo.cfg")


def test_load_config_layers_file_then_overrides(tmp_path):
    path = tmp_path / "scenario.cfg"
    path.write_text("trials = 40\nsnr_min_db = -5\n")
    cfg, provided = load_config(path, overrides={"trials": 7})
    assert cfg.trials == 7
    assert cfg.snr_min_db == -5.0
    assert provided == {"trials", "snr_min_db"}
    cfg_default, provided_default = load_config(None)
    assert cfg_default == ScenarioConfig()
    assert provided_default == set()


@pytest.mark.parametrize("kwargs,message", [
    ({"n_cells": 2}, "single-cell"),
    ({"distance_near_m": 5.0}, "min_distance_m"),
    ({"distance_near_m": 60.0}, "distance_near_m must be <="),
    ({"path_loss_exponent": 0.0}, "path_loss_exponent"),
    ({"shadowing_sigma_db": -1.0}, "sigmas"),
    ({"code_length_m": 4}, "code_length_m"),
    ({"allocation": "even"}, "allocation"),
    ({"cpf_strategy": "magic"}, "cpf_strategy"),
    ({"share_cap": 0.0}, "share_cap"),
    ({"w_near": 1.5}, "w_near"),
    ({"trials": 0}, "trials"),
    ({"snr_step_db": 0.0}, "snr_step_db"),
    ({"snr_max_db": -20.0}, "snr_max_db"),
    ({"mf_slots": 0}, "mf_slots"),
    ({"export_points": 100}, "export_points"),
    ({"fading_ar_coeff": 1.0}, "fading_ar_coeff"),
    ({"walk_step_m": -0.1}, "walk_step_m"),
    ({"k_select": 8}, "k_select"),
    ({"snr_max_db": 140.0}, "SNR axis implies"),
])
def test_config_validation_matrix(kwargs, message):
    with pytest.raises(ValueError, match=message):
        ScenarioConfig(**kwargs)


# --- results ---------------------------------------------------------------


def test_format_number_examples():
    assert format_number(-15.0) == "-15"
    assert format_number(3) == "3"
    assert format_number(2.5) == "2.5"
    assert format_number(1e-13) == "1e-13"
    assert format_number(0.3322) == "0.3322"


def test_ser_stderr_values():
    assert ser_stderr(0.05, 2000) == pytest.approx(
        math.sqrt(0.05 * 0.95 / 2000.0), rel=1e-12)
    smoothed = (0.0 * 100 + 1.0) / 102.0
    assert ser_stderr(0.0, 100) == pytest.approx(
        math.sqrt(smoothed * (1 - smoothed) / 100.0), rel=1e-12)
    assert ser_stderr(1.0, 100) == pytest.approx(ser_stderr(0.0, 100), rel=1e-12)
    assert ser_stderr(0.0, 1) == 0.0


@given(n=st.integers(min_value=2, max_value=10 ** 6), data=st.data())
def test_ser_stderr_is_positive_for_real_sample_sizes(n, data):
    # realizable rates are k errors over 7n symbols, never subnormal floats
    k = data.draw(st.integers(min_value=0, max_value=7 * n))
    assert ser_stderr(k / (7.0 * n), n) > 0.0


def test_mean_stderr_values():
    mean, se = mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert mean == pytest.approx(2.5)
    assert se == pytest.approx(math.sqrt(5.0 / 3.0) / 2.0, rel=1e-12)
    assert mean_stderr([7.5]) == (7.5, 0.0)
    empty_mean, empty_se = mean_stderr([])
    assert math.isnan(empty_mean) and math.isnan(empty_se)


def test_artifact_overwrite_guard(tmp_path):
    res = run_ser_sweep(TINY, code_lengths=(5,))
    path = tmp_path / "ser.csv"
    write_result(res, path)
    assert path.exists() and sidecar_path(path).exists()
    first = path.read_bytes()
    meta = json.loads(sidecar_path(path).read_text())
    assert meta["fingerprint"] == res.fingerprint
    assert meta["config"]["trials"] == 25
    assert "timestamp" not in json.dumps(meta).lower()
    # identical fingerprint: silent no-op rerun
    write_result(res, path)
    assert path.read_bytes() == first
    # different fingerprint: refuse without force
    other = run_ser_sweep(with_overrides(TINY, master_seed=1), code_lengths=(5,))
    with pytest.raises(FileExistsError, match="--force"):
        write_result(other, path)
    write_result(other, path, force=True)
    assert path.read_bytes() != first


def test_artifact_with_unreadable_sidecar_still_guards(tmp_path):
    path = tmp_path / "x.csv"
    write_artifact(path, "a,b\n", {"fingerprint": "f" * 64})
    sidecar_path(path).write_text("not json")
    with pytest.raises(FileExistsError, match="<unreadable>"):
        write_artifact(path, "a,b\n", {"fingerprint": "f" * 64})


def test_csv_layout_and_aggregate_rows():
    res = run_ser_sweep(TINY, code_lengths=(5,))
    text = res.csv_text()
    lines = text.strip().split("\n")
    assert lines[0] == "axis,user_id,metric,value,stderr,trials"
    assert len(lines) == 4  # header + users 0, 1 and the aggregate row
    assert [line.split(",")[1] for line in lines[1:]] == ["0", "1", "-1"]
    assert text == res.csv_text()  # rendering is pure


# --- seeding ---------------------------------------------------------------


def test_trial_streams_are_reproducible_and_independent():
    a = trial_rng(5, 2, PURPOSE_CHANNEL).standard_normal(4)
    b = trial_rng(5, 2, PURPOSE_CHANNEL).standard_normal(4)
    assert np.array_equal(a, b)
    c = trial_rng(5, 2, PURPOSE_NOISE).standard_normal(4)
    d = trial_rng(5, 3, PURPOSE_CHANNEL).standard_normal(4)
    e = trial_rng(6, 2, PURPOSE_CHANNEL).standard_normal(4)
    for other in (c, d, e):
        assert not np.array_equal(a, other)


def test_purpose_keys_are_distinct():
    purposes = {PURPOSE_CHANNEL, PURPOSE_CODES, PURPOSE_SYMBOLS,
                PURPOSE_NOISE, PURPOSE_WALK}
    assert len(purposes) == 5


# --- sweep drivers ---------------------------------------------------------


def test_family_matrix_cache_is_write_protected():
    fam = cached_family_matrix(5)
    assert fam.shape == (33, 31)
    with pytest.raises(ValueError):
        fam[0, 0] = 0.0


def test_two_user_driver_requires_two_users():
    cfg = with_overrides(TINY, n_users=3)
    with pytest.raises(ValueError, match="two-user"):
        run_two_user_trial(cfg, 0.0, 0)


def test_ideal_conditions_give_zero_error_with_positive_error_bars():
    cfg = with_overrides(TINY, trials=30, snr_min_db=25.0, snr_max_db=25.0,
                         noiseless=True, perfect_csi=True)
    res = run_ser_sweep(cfg, code_lengths=(5,))
    rows = res.values("ser_L31", user_id=AGGREGATE_USER)
    assert list(rows) == [25.0]
    for user in (0, 1, AGGREGATE_USER):
        row = res.values("ser_L31", user_id=user)[25.0]
        assert row.value == 0.0
        assert row.stderr > 0.0
        assert row.trials == 30


def test_sweep_output_is_deterministic():
    a = run_ser_sweep(TINY, code_lengths=(5,)).csv_text()
    b = run_ser_sweep(TINY, code_lengths=(5,)).csv_text()
    assert a == b


def test_metric_names_follow_code_length():
    cfg = with_overrides(TINY, trials=5)
    res = run_ser_sweep(cfg, code_lengths=(6, 5))
    metrics = {r.metric for r in res.rows}
    assert metrics == {"ser_L31", "ser_L63"}
    assert res.metadata["code_lengths"] == [5, 6]


def test_baseline_axis_spacing():
    assert baseline_axis(ScenarioConfig()) == [-20.0, -15.0, -10.0, -5.0, 0.0]
    assert baseline_axis(ScenarioConfig(snr_step_db=10.0)) == [-20.0, -10.0, 0.0]


def test_ideal_baseline_comparison_is_error_free_for_both_systems():
    cfg = with_overrides(TINY, trials=20, noiseless=True, perfect_csi=True)
    res = run_baseline_comparison(cfg, snr_db=[0.0])
    for metric in ("ser_gold", "ser_baseline"):
        assert res.values(metric)[0.0].value == 0.0


def test_perfect_csi_collapses_estimation_error_to_zero():
    cfg = with_overrides(TINY, trials=10, perfect_csi=True)
    res = run_cpf_eval(cfg, snr_db=[0.0])
    for metric in ("mse_raw", "mse_final", "mse_delta"):
        assert res.values(metric)[0.0].value == 0.0


def test_disabled_refinement_reports_zero_delta():
    cfg = with_overrides(TINY, trials=10, cpf_strategy="none")
    res = run_cpf_eval(cfg, snr_db=[0.0])
    assert res.values("mse_raw")[0.0].value > 0.0
    assert res.values("mse_delta")[0.0].value == 0.0
    assert res.values("mse_final")[0.0].value == res.values("mse_raw")[0.0].value
    assert res.metadata["strategy"] == "none"


def test_scaling_study_mse_is_tiny_without_noise_up_to_family_size():
    cfg = with_overrides(TINY, trials=20, noiseless=True)
    res = run_mse_scaling(cfg, user_counts=(2, 33))
    vals = res.values("mse_mf")
    assert vals[2.0].value < 1e-2
    assert vals[33.0].value < 1e-2


def test_scaling_study_matches_a_scalar_reference_implementation():
    cfg = with_overrides(TINY, trials=1, mf_slots=4)
    res = run_mse_scaling(cfg, user_counts=(2,), snr_db=10.0)
    fam = cached_family_matrix(5)
    codes = fam[list(assign_codes(fam, 2).indices)]
    n0 = cfg.noise_power_w()
    phi = (10.0 ** 1.0) * n0 / 2.0
    rng_ch = trial_rng(cfg.master_seed, 0, PURPOSE_CHANNEL)
    rng_sy = trial_rng(cfg.master_seed, 0, PURPOSE_SYMBOLS)
    rng_no = trial_rng(cfg.master_seed, 0, PURPOSE_NOISE)
    h = (rng_ch.standard_normal(2) + 1j * rng_ch.standard_normal(2)) / math.sqrt(2)
    sym = rng_sy.choice(np.array([-1.0, 1.0]), size=(2, 4))
    y = np.zeros((4, 31), dtype=complex)
    for s in range(4):
        for n in range(2):
            y[s] += math.sqrt(phi / 31.0) * h[n] * sym[n, s] * codes[n]
    y += math.sqrt(n0 / 2.0) * (rng_no.standard_normal(y.shape)
                                + 1j * rng_no.standard_normal(y.shape))
    h_hat = np.zeros(2, dtype=complex)
    for n in range(2):
        per_slot = [matched_filter_estimate(y[s], codes[n], symbol=sym[n, s],
                                            symbol_power=phi) for s in range(4)]
        h_hat[n] = np.mean(per_slot)
    oracle = float(np.mean(np.abs(h_hat - h) ** 2))
    assert res.values("mse_mf")[2.0].value == pytest.approx(oracle, rel=1e-10)


def test_scaling_study_reports_code_reuse():
    cfg = with_overrides(TINY, trials=2)
    res = run_mse_scaling(cfg, user_counts=(2, 40, 100))
    reuse = res.values("reuse_factor")
    assert reuse[2.0].value == 1.0
    assert reuse[40.0].value == 2.0
    assert reuse[100.0].value == 4.0
    assert DEFAULT_USER_COUNTS == (2, 40, 50, 60, 70, 80, 90, 100)


def test_scaling_study_bounds_user_counts():
    with pytest.raises(ValueError, match=r"\[2, 128\]"):
        run_mse_scaling(TINY, user_counts=(1,))
    with pytest.raises(ValueError, match=r"\[2, 128\]"):
        run_mse_scaling(TINY, user_counts=(129,))


# --- temporal dataset ------------------------------------------------------


def test_temporal_series_shapes_and_determinism():
    series = simulate_temporal_series(EXPORT_SMALL)
    assert series.n_steps == 30 and series.n_users == 2
    assert series.h_true.shape == (30, 2)
    assert np.all(series.phi > 0.0)
    assert set(np.unique(series.x_hat.real)) <= {-1.0, 1.0}
    assert np.all(series.x_hat.imag == 0.0)
    again = simulate_temporal_series(EXPORT_SMALL)
    assert np.array_equal(series.h_true, again.h_true)
    assert np.array_equal(series.h_raw, again.h_raw)


def test_temporal_fading_is_strongly_correlated_step_to_step():
    cfg = with_overrides(EXPORT_SMALL, export_points=400, export_window=10,
                         export_horizon=5, walk_step_m=0.0,
                         export_shadowing_sigma_db=0.0)
    series = simulate_temporal_series(cfg)
    h = series.h_true[:, 0]
    num = np.abs(np.mean(h[1:] * np.conj(h[:-1])))
    den = np.mean(np.abs(h) ** 2)
    assert num / den > 0.9


def test_dataset_csv_layout():
    series = simulate_temporal_series(EXPORT_SMALL)
    text = dataset_csv_text(series)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(DATASET_COLUMNS)
    assert lines[0] == ("time_step,user_id,h_real,h_imag,phi,"
                        "x_hat_real,x_hat_imag,h_raw_real,h_raw_imag")
    assert len(lines) == 1 + 30 * 2
    assert lines[1].startswith("0,0,")
    assert lines[2].startswith("0,1,")
    first = lines[1].split(",")
    assert float(first[2]) == series.h_true[0, 0].real


def test_dataset_sidecar_windowing_metadata():
    _, sidecar = dataset_artifact(EXPORT_SMALL)
    meta = sidecar["metadata"]
    assert meta["rows"] == 60
    assert meta["valid_windows_per_user"] == 30 - 10 - 5 + 1
    assert meta["features"] == ["h_raw_real", "h_raw_imag", "phi",
                                "x_hat_real", "x_hat_imag"]
    assert meta["target"] == ["h_real", "h_imag"]


def test_export_is_deterministic_and_guarded(tmp_path):
    path = tmp_path / "train.csv"
    export_training_dataset(EXPORT_SMALL, path)
    first = path.read_bytes()
    export_training_dataset(EXPORT_SMALL, path)  # same fingerprint: fine
    assert path.read_bytes() == first
    with pytest.raises(FileExistsError, match="--force"):
        export_training_dataset(EXPORT_SMALL, path, n_points=25)
    export_training_dataset(EXPORT_SMALL, path, n_points=25, force=True)
    meta = json.loads(sidecar_path(path).read_text())
    assert meta["metadata"]["n_points"] == 25
    assert meta["config"]["export_points"] == 25


def test_external_predictions_score_against_the_series(tmp_path):
    series = simulate_temporal_series(EXPORT_SMALL)
    lines = ["trial,user,h_pred_real,h_pred_imag"]
    zero_lines = ["trial,user,h_pred_real,h_pred_imag"]
    for t in range(20, 30):
        for u in range(2):
            h = complex(series.h_true[t, u])
            lines.append(f"{t},{u},{h.real!r},{h.imag!r}")
            zero_lines.append(f"{t},{u},0.0,0.0")
    perfect = tmp_path / "perfect.csv"
    perfect.write_text("\n".join(lines) + "\n")
    res = evaluate_external_predictions(
        EXPORT_SMALL, ExternalPredictor.from_file(perfect))
    assert res.values("mse_final")[10.0].value == 0.0
    assert res.values("mse_zero")[10.0].value > 0.0
    assert res.metadata["n_predictions"] == 20
    zeros = tmp_path / "zeros.csv"
    zeros.write_text("\n".join(zero_lines) + "\n")
    res0 = evaluate_external_predictions(
        EXPORT_SMALL, ExternalPredictor.from_file(zeros))
    assert res0.values("mse_final")[10.0].value == pytest.approx(
        res0.values("mse_zero")[10.0].value, rel=1e-12)


def test_external_predictions_validate_their_keys(tmp_path):
    bad_step = tmp_path / "bad_step.csv"
    bad_step.write_text("trial,user,h_pred_real,h_pred_imag\n99,0,0,0\n")
    with pytest.raises(ValueError, match=r"99.*valid time steps are 0\.\.29"):
        evaluate_external_predictions(
            EXPORT_SMALL, ExternalPredictor.from_file(bad_step))
    bad_user = tmp_path / "bad_user.csv"
    bad_user.write_text("trial,user,h_pred_real,h_pred_imag\n0,7,0,0\n")
    with pytest.raises(ValueError, match="unknown user 7"):
        evaluate_external_predictions(
            EXPORT_SMALL, ExternalPredictor.from_file(bad_user))


def test_cpf_eval_delegates_to_the_external_scorer(tmp_path):
    series = simulate_temporal_series(EXPORT_SMALL)
    path = tmp_path / "pred.csv"
    h = complex(series.h_true[0, 0])
    path.write_text("trial,user,h_pred_real,h_pred_imag\n"
                    f"0,0,{h.real!r},{h.imag!r}\n")
    res = run_cpf_eval(EXPORT_SMALL, prediction_file=path)
    assert res.metadata["strategy"] == "external"
    assert res.metadata["prediction_file"] == str(path)
    assert res.values("mse_final", user_id=0)[10.0].value == 0.0
