"""Sweep result container, stable CSV rendering, and fingerprint-guarded
persistence (CSV + JSON sidecar)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .. import __version__
from .config import ScenarioConfig, config_dict

CSV_COLUMNS = ("axis", "user_id", "metric", "value", "stderr", "trials")
AGGREGATE_USER = -1  # user_id for rows aggregated over all users


@dataclass(frozen=True)
class SweepRow:
    axis: float
    user_id: int
    metric: str
    value: float
    stderr: float
    trials: int


@dataclass
class SweepResult:
    name: str
    rows: list[SweepRow]
    config: ScenarioConfig
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def values(self, metric: str, user_id: int = AGGREGATE_USER) -> dict[float, SweepRow]:
        return {r.axis: r for r in self.rows if r.metric == metric and r.user_id == user_id}

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join((
                format_number(r.axis), str(r.user_id), r.metric,
                format_number(r.value), format_number(r.stderr), str(r.trials))))
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "version": __version__,
            "fingerprint": self.fingerprint,
            "columns": list(CSV_COLUMNS),
            "config": config_dict(self.config),
            "metadata": self.metadata,
        }


def format_number(x: float) -> str:
    """Stable, compact decimal rendering used everywhere in result files."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def ser_stderr(p_hat: float, trials: int) -> float:
    """Binomial standard error sqrt(p(1-p)/n).  Degenerate estimates
    (p_hat exactly 0 or 1) use the Laplace-smoothed rate so reported error
    bars stay positive."""
    if trials <= 1:
        return 0.0
    p = p_hat
    if p <= 0.0 or p >= 1.0:
        p = (p * trials + 1.0) / (trials + 2.0)
    return math.sqrt(p * (1.0 - p) / trials)


def mean_stderr(values: Iterable[float]) -> tuple[float, float]:
    """Sample mean and its standard error std/sqrt(n)."""
    arr = np.asarray(list(values), dtype=np.float64)
    n = arr.shape[0]
    if n == 0:
        return float("nan"), float("nan")
    se = float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return float(arr.mean()), se


def sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".meta.json")


def check_overwrite(csv_path: Path, fingerprint: str, force: bool) -> None:
    """Refuse to overwrite an existing result whose recorded fingerprint
    differs, unless forced.  Matching fingerprints rewrite in place (the
    output is deterministic, so this is a no-op rerun)."""
    if force or not csv_path.exists():
        return
    meta = sidecar_path(csv_path)
    existing = None
    if meta.exists():
        try:
            existing = json.loads(meta.read_text()).get("fingerprint")
        except (OSError, json.JSONDecodeError):
            existing = None
    if existing != fingerprint:
        raise FileExistsError(
            f"{csv_path} exists with fingerprint {existing or '<unreadable>'} != "
            f"{fingerprint}; pass --force to overwrite")


def write_artifact(csv_path: str | Path, csv_text: str, sidecar: dict[str, Any],
                   force: bool = False) -> Path:
    """Write a CSV artifact plus its JSON sidecar under the overwrite guard.

    Both files are deterministic functions of config + seed + version (no
    timestamps), so reruns are byte-identical.
    """
    csv_path = Path(csv_path)
    check_overwrite(csv_path, sidecar["fingerprint"], force)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(csv_text)
    sidecar_path(csv_path).write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path


def write_result(result: SweepResult, csv_path: str | Path, force: bool = False) -> Path:
    return write_artifact(csv_path, result.csv_text(), result.sidecar(), force=force)
