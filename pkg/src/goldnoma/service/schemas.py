"""Request/response models for the simulation service.

Every sweep request carries the scenario as either raw key=value text
(``config_text``) or a flat mapping (``config``); the mapping wins on
conflicts.  Responses embed both the parsed rows and the exact artifact
bytes (CSV + sidecar) so clients can persist byte-identical files.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ScenarioRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict,
                                   description="flat config overrides (key -> value)")
    config_text: Optional[str] = Field(default=None,
                                       description="raw key=value config file content")


class SerSweepRequest(ScenarioRequest):
    code_lengths: Optional[list[int]] = Field(
        default=None, description="sequence degrees m; default (5, 6, 7)")


class BaselineCompareRequest(ScenarioRequest):
    snr_db: Optional[list[float]] = Field(
        default=None, description="explicit SNR grid; default -20..0 dB")


class MseScalingRequest(ScenarioRequest):
    user_counts: Optional[list[int]] = Field(
        default=None, description="user counts; default (2, 40, 50, ..., 100)")
    snr_db: float = Field(default=20.0, description="operating transmit SNR (dB)")


class CpfEvalRequest(ScenarioRequest):
    snr_db: Optional[list[float]] = Field(
        default=None, description="explicit SNR grid; default = config axis")
    prediction_csv: Optional[str] = Field(
        default=None, description="external prediction file content "
        "(header trial,user,h_pred_real,h_pred_imag)")
    prediction_path: Optional[str] = Field(
        default=None, description="server-local path to a prediction file")


class DatasetExportRequest(ScenarioRequest):
    n_points: Optional[int] = None
    window: Optional[int] = None
    horizon: Optional[int] = None


class SweepRowModel(BaseModel):
    axis: float
    user_id: int
    metric: str
    value: float
    stderr: float
    trials: int


class SweepResponse(BaseModel):
    name: str
    fingerprint: str
    columns: list[str]
    rows: list[SweepRowModel]
    metadata: dict[str, Any]
    csv: str
    sidecar: dict[str, Any]


class DatasetResponse(BaseModel):
    name: str
    fingerprint: str
    columns: list[str]
    metadata: dict[str, Any]
    csv: str
    sidecar: dict[str, Any]


class GoldReportRequest(BaseModel):
    m: int = Field(default=5, description="sequence degree (5, 6, or 7)")
    max_pairs: Optional[int] = Field(
        default=200, description="cap on correlation pairs sampled for the table")
    include_family: bool = Field(
        default=True, description="attach the plain-text family export")
    seed: int = Field(default=0, description="pair-sampling seed")


class GoldReportResponse(BaseModel):
    m: int
    family_size: int
    code_length: int
    t_value: int
    expected_values: list[int]
    report_text: str
    family_text: Optional[str]
