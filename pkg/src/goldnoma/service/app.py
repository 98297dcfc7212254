"""FastAPI application wrapping the simulation drivers.

The service is stateless and deterministic: identical requests produce
identical artifacts.  Validation failures surface as HTTP 422 with the
underlying message.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..gold_codes import expected_ccf_values, gold_t, format_family, \
    generate_gold_family, correlation_report
from ..harness.config import ScenarioConfig, build_config, parse_config_text, \
    with_overrides
from ..harness.dataset import dataset_artifact
from ..harness.results import SweepResult
from ..harness.sweeps import run_baseline_comparison, run_cpf_eval, \
    run_mse_scaling, run_ser_sweep
from .schemas import (
    BaselineCompareRequest,
    CpfEvalRequest,
    DatasetExportRequest,
    DatasetResponse,
    GoldReportRequest,
    GoldReportResponse,
    HealthResponse,
    MseScalingRequest,
    ScenarioRequest,
    SerSweepRequest,
    SweepResponse,
    SweepRowModel,
)


def _scenario(req: ScenarioRequest) -> ScenarioConfig:
    values: dict = {}
    if req.config_text:
        parsed, _ = parse_config_text(req.config_text, source="<request config_text>")
        values.update(parsed)
    values.update(req.config or {})
    return build_config(values, source="<request config>")


def _sweep_response(result: SweepResult) -> SweepResponse:
    return SweepResponse(
        name=result.name,
        fingerprint=result.fingerprint,
        columns=list(result.sidecar()["columns"]),
        rows=[SweepRowModel(axis=r.axis, user_id=r.user_id, metric=r.metric,
                            value=r.value, stderr=r.stderr, trials=r.trials)
              for r in result.rows],
        metadata=result.metadata,
        csv=result.csv_text(),
        sidecar=result.sidecar(),
    )


def create_app() -> FastAPI:
    app = FastAPI(
        title="goldnoma",
        version=__version__,
        description="Link-level downlink-NOMA simulation service: Gold-sequence "
                    "user separation, two-phase channel estimation, SIC reception, "
                    "and Monte Carlo experiment drivers.")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/sweeps/ser", response_model=SweepResponse)
    def ser_sweep(req: SerSweepRequest) -> SweepResponse:
        try:
            cfg = _scenario(req)
            lengths = tuple(req.code_lengths) if req.code_lengths else None
            return _sweep_response(run_ser_sweep(cfg, lengths))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/sweeps/baseline", response_model=SweepResponse)
    def baseline_compare(req: BaselineCompareRequest) -> SweepResponse:
        try:
            cfg = _scenario(req)
            return _sweep_response(run_baseline_comparison(cfg, req.snr_db))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/sweeps/mse-scaling", response_model=SweepResponse)
    def mse_scaling(req: MseScalingRequest) -> SweepResponse:
        try:
            cfg = _scenario(req)
            counts = tuple(req.user_counts) if req.user_counts else None
            return _sweep_response(run_mse_scaling(cfg, counts, snr_db=req.snr_db))
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/sweeps/cpf-eval", response_model=SweepResponse)
    def cpf_eval(req: CpfEvalRequest) -> SweepResponse:
        try:
            cfg = _scenario(req)
            if req.prediction_csv is not None and req.prediction_path is not None:
                raise ValueError("give prediction_csv or prediction_path, not both")
            if req.prediction_csv is not None:
                with tempfile.TemporaryDirectory() as tmp:
                    pred = Path(tmp) / "predictions.csv"
                    pred.write_text(req.prediction_csv)
                    return _sweep_response(run_cpf_eval(cfg, pred, req.snr_db))
            return _sweep_response(run_cpf_eval(cfg, req.prediction_path, req.snr_db))
        except (ValueError, KeyError, OSError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/datasets/export", response_model=DatasetResponse)
    def export_dataset(req: DatasetExportRequest) -> DatasetResponse:
        try:
            cfg = _scenario(req)
            overrides = {}
            if req.n_points is not None:
                overrides["export_points"] = req.n_points
            if req.window is not None:
                overrides["export_window"] = req.window
            if req.horizon is not None:
                overrides["export_horizon"] = req.horizon
            if overrides:
                cfg = with_overrides(cfg, **overrides)
            csv_text, sidecar = dataset_artifact(cfg)
            return DatasetResponse(name=sidecar["name"],
                                   fingerprint=sidecar["fingerprint"],
                                   columns=sidecar["columns"],
                                   metadata=sidecar["metadata"],
                                   csv=csv_text, sidecar=sidecar)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/gold/family-report", response_model=GoldReportResponse)
    def gold_report(req: GoldReportRequest) -> GoldReportResponse:
        try:
            family = generate_gold_family(req.m)
            rows = correlation_report(family, max_pairs=req.max_pairs, seed=req.seed)
            L = family[0].length
            lines = [
                f"Gold family report: m={req.m}, {len(family)} codes of length {L}",
                f"three-valued cross-correlation set: "
                f"{sorted(expected_ccf_values(req.m))} (t(m)={gold_t(req.m)}, "
                f"normalized peak {gold_t(req.m)}/{L} = {gold_t(req.m) / L:.4f})",
                f"pairs sampled: {len(rows)}",
                "",
                "i,j,max_abs,normalized_max,values",
            ]
            for row in rows:
                values = ";".join(f"{v}x{c}" for v, c in row["values"])
                lines.append(f"{row['i']},{row['j']},{row['max_abs']},"
                             f"{row['normalized_max']:.6f},{values}")
            report_text = "\n".join(lines) + "\n"
            family_text = format_family(family) if req.include_family else None
            return GoldReportResponse(
                m=req.m, family_size=len(family), code_length=L,
                t_value=gold_t(req.m),
                expected_values=sorted(expected_ccf_values(req.m)),
                report_text=report_text, family_text=family_text)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    return app
