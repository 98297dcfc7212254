"""Channel estimation stack: code-despread raw estimates, weighted
subcarrier selection, reliability-gated data-aided re-estimation, and a
pluggable refinement stage (deterministic baseline or an externally
supplied predictor)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .phy import DetectedSymbols, correlate


def despread_estimate(y_pilot: np.ndarray, code: np.ndarray, pilot_power: float,
                      pilot_symbol: complex = 1.0 + 0.0j) -> complex:
    """Raw channel estimate from the code-multiplexed pilot phase.

    Correlating the shared pilot observation against one user's signature
    collapses that user's contribution to sqrt(phi * L) * x_p * h and
    suppresses the others by the cross-correlation margin:

        h_raw = <y_p, C_n> / (sqrt(phi_n * L) * x_p)

    Multiple pilot slots are averaged.
    """
    if pilot_power <= 0:
        raise ValueError("pilot_power must be positive")
    if pilot_symbol == 0:
        raise ValueError("pilot_symbol must be nonzero")
    y = np.atleast_2d(np.asarray(y_pilot, dtype=np.complex128))
    code = np.asarray(code, dtype=np.float64)
    L = code.shape[0]
    if y.shape[1] != L:
        raise ValueError(f"pilot observation has {y.shape[1]} chips, code has {L}")
    stats = correlate(y, code)  # [n_pilot]
    return complex(stats.mean() / (np.sqrt(pilot_power * L) * pilot_symbol))


@dataclass(frozen=True)
class SelectionConfig:
    w_near: float = 0.3
    w_far: float = 0.7
    k_select: int = 4

    def __post_init__(self):
        if not 0.0 <= self.w_near <= 1.0:
            raise ValueError(f"w_near must be in [0, 1], got {self.w_near}")
        if not 0.0 <= self.w_far <= 1.0:
            raise ValueError(f"w_far must be in [0, 1], got {self.w_far}")
        if self.k_select < 1:
            raise ValueError(f"k_select must be >= 1, got {self.k_select}")


def weighted_subcarrier_selection(phi_near: np.ndarray, phi_far: np.ndarray,
                                  cfg: SelectionConfig) -> np.ndarray:
    """Rank data subcarriers by the weighted per-slot power average

        weighted[k] = phi_near[k] * w_near + phi_far[k] * w_far

    and return the indices of the k_select largest, ordered by descending
    weighted average with ties broken by ascending subcarrier index.
    """
    pn = np.asarray(phi_near, dtype=np.float64)
    pf = np.asarray(phi_far, dtype=np.float64)
    if pn.shape != pf.shape or pn.ndim != 1:
        raise ValueError(f"phi vectors must be equal-length 1-D, got {pn.shape} and {pf.shape}")
    if cfg.k_select > pn.shape[0]:
        raise ValueError(f"k_select={cfg.k_select} exceeds {pn.shape[0]} subcarriers")
    weighted = pn * cfg.w_near + pf * cfg.w_far
    order = sorted(range(weighted.shape[0]), key=lambda i: (-weighted[i], i))
    return np.array(order[:cfg.k_select], dtype=np.int64)


def data_aided_estimate(statistics: np.ndarray, symbols: np.ndarray,
                        reliabilities: np.ndarray, selected: np.ndarray,
                        phi_row: np.ndarray, code_length: int,
                        noise_power_w: float, h_raw: complex,
                        reliability_threshold: float = 0.7) -> tuple[complex, int]:
    """Re-estimate the channel from confidently detected data symbols.

    On the selected slots whose reliability clears the threshold, each
    correlator output X_k = sqrt(phi_k * L) * s_k * h + interference+noise
    is demodulated by the decided symbol and combined with a regularized
    least-squares shrink:

        h_da = sum_k sqrt(phi_k * L) * conj(s_k) * X_k
               / (sum_k phi_k * L + lam)

    The regularizer is matched to the estimate's own operating point,
    lam = noise_power * L / |h_raw|^2: when the raw estimate already
    indicates a strong per-symbol SNR the shrink vanishes, and when the
    decisions are noise-dominated it pulls the re-estimate toward zero
    instead of amplifying decision errors.

    Returns (h_da, n_reliable); n_reliable == 0 yields (0, 0) and callers
    fall back to the raw estimate.
    """
    sel = np.asarray(selected, dtype=np.int64)
    X = np.asarray(statistics, dtype=np.complex128)[sel]
    s = np.asarray(symbols, dtype=np.complex128)[sel]
    r = np.asarray(reliabilities, dtype=np.float64)[sel]
    phi = np.asarray(phi_row, dtype=np.float64)[sel]
    keep = r >= reliability_threshold
    n_rel = int(keep.sum())
    if n_rel == 0:
        return 0.0 + 0.0j, 0
    scale = np.sqrt(phi[keep] * code_length)
    num = np.sum(scale * np.conj(s[keep]) * X[keep])
    raw_gain_sq = max(abs(h_raw) ** 2, 1e-300)
    lam = noise_power_w * code_length / raw_gain_sq
    den = np.sum(phi[keep] * code_length) + lam
    return complex(num / den), n_rel


def blend_estimates(h_raw: complex, h_da: complex, n_reliable: int) -> complex:
    """Confidence blend with convex weight w = R/(R+1) on the data-aided
    term: zero reliable symbols returns the raw estimate exactly, and
    trust in the refinement grows with the evidence count."""
    if n_reliable <= 0:
        return h_raw
    w = n_reliable / (n_reliable + 1.0)
    return w * h_da + (1.0 - w) * h_raw


@dataclass(frozen=True)
class EstimateReport:
    h_raw: complex
    h_final: complex
    selected_subcarriers: np.ndarray
    reliable_symbol_count: int
    mse_raw: float = float("nan")
    mse_final: float = float("nan")


REFINEMENT_STRATEGIES = ("baseline", "none", "external")


def cpf_refine(h_raw: complex, phi_row: np.ndarray, x_hat: DetectedSymbols,
               strategy: str = "baseline", *,
               selection: SelectionConfig | None = None,
               selected: np.ndarray | None = None,
               code_length: int = 0,
               noise_power_w: float = 0.0,
               reliability_threshold: float = 0.7,
               external: "ExternalPredictor | None" = None,
               trial: int = -1) -> EstimateReport:
    """Refinement stage mapping (h_raw, phi_row, x_hat) to h_final.

    Strategies:
      * "baseline"  — data-aided re-estimation restricted to the slots in
        ``selected`` (computed upstream by weighted_subcarrier_selection
        from both users' allocations, or passed explicitly), blended with
        h_raw by the reliability-count convex weight.
      * "none"      — h_final = h_raw (pilot-only).
      * "external"  — h_final is looked up from a prediction file keyed by
        (trial, user); ``external`` must be an ExternalPredictor.
    """
    if strategy not in REFINEMENT_STRATEGIES:
        raise ValueError(
            f"unknown refinement strategy {strategy!r}; expected one of {REFINEMENT_STRATEGIES}")
    phi_row = np.asarray(phi_row, dtype=np.float64)
    n_data = phi_row.shape[0]
    if strategy == "none":
        return EstimateReport(h_raw=h_raw, h_final=h_raw,
                              selected_subcarriers=np.empty(0, dtype=np.int64),
                              reliable_symbol_count=0)
    if strategy == "external":
        if external is None:
            raise ValueError("external strategy requires a loaded ExternalPredictor")
        h_pred = external.lookup(trial, x_hat.user_id)
        return EstimateReport(h_raw=h_raw, h_final=h_pred,
                              selected_subcarriers=np.empty(0, dtype=np.int64),
                              reliable_symbol_count=0)
    if selected is None:
        sel_cfg = selection if selection is not None else SelectionConfig()
        # single-allocation fallback: rank this user's own row both ways
        selected = weighted_subcarrier_selection(phi_row, phi_row, sel_cfg)
    if code_length <= 0:
        raise ValueError("baseline strategy needs the spreading code length")
    h_da, n_rel = data_aided_estimate(
        x_hat.statistics, x_hat.symbols, x_hat.reliabilities, selected,
        phi_row, code_length, noise_power_w, h_raw, reliability_threshold)
    return EstimateReport(h_raw=h_raw, h_final=blend_estimates(h_raw, h_da, n_rel),
                          selected_subcarriers=np.asarray(selected, dtype=np.int64),
                          reliable_symbol_count=n_rel)


def matched_filter_estimate(y_slot: np.ndarray, code: np.ndarray,
                            symbol: complex = 1.0 + 0.0j,
                            symbol_power: float = 1.0) -> complex:
    """Single-slot known-symbol sounding estimate <y, C> / (sqrt(phi*L)*s)."""
    code = np.asarray(code, dtype=np.float64)
    L = code.shape[0]
    if symbol == 0:
        raise ValueError("sounding symbol must be nonzero")
    if symbol_power <= 0:
        raise ValueError("symbol_power must be positive")
    return complex(correlate(np.asarray(y_slot, dtype=np.complex128), code)
                   / (np.sqrt(symbol_power * L) * symbol))


def mse(true_h: np.ndarray, est_h: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-user squared error |h - h_hat|^2 and its mean over users."""
    t = np.asarray(true_h, dtype=np.complex128)
    e = np.asarray(est_h, dtype=np.complex128)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    per_user = np.abs(e - t) ** 2
    return per_user, float(per_user.mean())


# --- external predictor support -------------------------------------------

PREDICTION_COLUMNS = ("trial", "user", "h_pred_real", "h_pred_imag")


def load_prediction_file(path: str | Path) -> dict[tuple[int, int], complex]:
    """Parse a prediction CSV keyed by (trial, user).

    Expects a header row naming exactly the columns
    trial,user,h_pred_real,h_pred_imag (any order).  Malformed content
    raises ValueError carrying the offending line number.
    """
    path = Path(path)
    out: dict[tuple[int, int], complex] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty prediction file") from None
        header = [c.strip() for c in header]
        if sorted(header) != sorted(PREDICTION_COLUMNS):
            raise ValueError(
                f"{path}: header must contain exactly columns "
                f"{','.join(PREDICTION_COLUMNS)}, got {','.join(header) or '<none>'}")
        col = {name: header.index(name) for name in PREDICTION_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                trial = int(row[col["trial"]])
                user = int(row[col["user"]])
                re_part = float(row[col["h_pred_real"]])
                im_part = float(row[col["h_pred_imag"]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            key = (trial, user)
            if key in out:
                raise ValueError(
                    f"{path}:{lineno}: duplicate prediction for trial={trial} user={user}")
            out[key] = complex(re_part, im_part)
    if not out:
        raise ValueError(f"{path}: no prediction rows")
    return out


@dataclass
class ExternalPredictor:
    """Immutable prediction table loaded once at startup; lookups are keyed
    by (trial, user) and a miss reports the offending trial index."""

    path: Path
    predictions: dict[tuple[int, int], complex] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExternalPredictor":
        p = Path(path)
        return cls(path=p, predictions=load_prediction_file(p))

    def lookup(self, trial: int, user: int) -> complex:
        try:
            return self.predictions[(trial, user)]
        except KeyError:
            raise KeyError(
                f"{self.path}: missing prediction for trial={trial} user={user}"
            ) from None

    def keys(self) -> list[tuple[int, int]]:
        return sorted(self.predictions.keys())
