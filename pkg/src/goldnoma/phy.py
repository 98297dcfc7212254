"""Downlink superposition PHY: fractional power allocation, Gold-spread
frame construction, per-user reception, and successive interference
cancellation.

Every subcarrier slot carries one symbol spread over the full code period.
Chips are scaled by sqrt(phi / L_c) so a slot's energy equals its allocated
power regardless of code length — SER comparisons across code lengths are
energy-fair and spreading buys interference suppression only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelRealization, UserProfile, add_awgn, as_generator


@dataclass(frozen=True)
class FrameSpec:
    n_subcarriers: int
    pilot_fraction: float
    n_users: int
    pilot_symbol: complex = 1.0 + 0.0j

    def __post_init__(self):
        if not 0.0 < self.pilot_fraction < 1.0:
            raise ValueError(f"pilot_fraction must be in (0, 1), got {self.pilot_fraction}")
        if self.n_pilot < 1:
            raise ValueError("pilot_fraction too small: frame needs at least one pilot slot")
        if self.n_subcarriers < self.n_users:
            raise ValueError(
                f"n_subcarriers ({self.n_subcarriers}) must be >= n_users ({self.n_users})"
            )
        if self.pilot_symbol == 0:
            raise ValueError("pilot_symbol must be nonzero")

    @property
    def n_pilot(self) -> int:
        return int(self.pilot_fraction * self.n_subcarriers)

    @property
    def n_data(self) -> int:
        return self.n_subcarriers - self.n_pilot


@dataclass(frozen=True)
class PowerAllocation:
    phi: np.ndarray      # [n_users, n_subcarriers], watts
    shares: np.ndarray   # [n_users], fractions of p_total
    p_total: float
    mode: str

    def user_power(self) -> np.ndarray:
        return self.phi.sum(axis=1)


def _capped_shares(weights: np.ndarray, cap: float) -> np.ndarray:
    """Normalize weights to shares, clipping any share above ``cap`` and
    redistributing the excess over the uncapped users."""
    n = weights.shape[0]
    cap = max(cap, 1.0 / n)  # keep the cap feasible for any user count
    shares = weights / weights.sum()
    capped = np.zeros(n, dtype=bool)
    for _ in range(n):
        over = (shares > cap + 1e-15) & ~capped
        if not over.any():
            break
        capped |= over
        shares[capped] = cap
        rest = ~capped
        remaining = 1.0 - cap * capped.sum()
        if rest.any():
            shares[rest] = weights[rest] / weights[rest].sum() * remaining
    return shares


def allocate_power(profiles: Sequence[UserProfile], p_total: float,
                   n_subcarriers: int, mode: str = "inverted",
                   share_cap: float = 0.8) -> PowerAllocation:
    """Fractional power allocation, uniform across subcarriers.

    mode="inverted" (default): shares proportional to d^alpha — far users
    get more power, clipped at ``share_cap`` per user.  mode="literal":
    shares proportional to the raw path-gain weights d^-alpha, normalized
    so the total equals p_total.
    """
    if p_total <= 0:
        raise ValueError("p_total must be positive")
    d = np.array([p.distance_m for p in profiles], dtype=np.float64)
    alpha = np.array([p.path_loss_exponent for p in profiles])
    if mode == "inverted":
        shares = _capped_shares(d ** alpha, share_cap)
    elif mode == "literal":
        w = d ** (-alpha)
        shares = w / w.sum()
    else:
        raise ValueError(f"unknown allocation mode {mode!r}")
    phi = np.repeat((shares * p_total / n_subcarriers)[:, None], n_subcarriers, axis=1)
    return PowerAllocation(phi=phi, shares=shares, p_total=p_total, mode=mode)


@dataclass(frozen=True)
class FrameTruth:
    """Ground truth attached to observations for scoring only — receiver
    functions never take it as input."""

    symbols: np.ndarray        # [n_users, n_data] transmitted data symbols
    composite_gain: np.ndarray  # [n_users]


@dataclass(frozen=True)
class SuperposedSignal:
    spec: FrameSpec
    alloc: PowerAllocation
    codes: np.ndarray         # [n_users, L] effective bipolar signatures
    symbols: np.ndarray       # [n_users, n_data]
    chips: np.ndarray         # [n_subcarriers, L] superposed transmit chips
    constituents: np.ndarray  # [n_users, n_subcarriers, L]

    @property
    def code_length(self) -> int:
        return self.codes.shape[1]


def build_frame(spec: FrameSpec, alloc: PowerAllocation, symbols: np.ndarray,
                codes: np.ndarray) -> SuperposedSignal:
    """Superpose all users: chips[k] = sum_n sqrt(phi[n,k]/L) * s[n,k] * C_n,
    where s is the pilot symbol on pilot slots and the data symbol otherwise.
    """
    codes = np.asarray(codes, dtype=np.float64)
    symbols = np.asarray(symbols, dtype=np.complex128)
    n, L = codes.shape
    if n != spec.n_users:
        raise ValueError(f"expected {spec.n_users} code rows, got {n}")
    if symbols.shape != (n, spec.n_data):
        raise ValueError(f"symbols must be [{n}, {spec.n_data}], got {symbols.shape}")
    if not np.all(np.abs(np.abs(codes) - 1.0) < 1e-12):
        raise ValueError("codes must be bipolar +-1 chips")
    slot_syms = np.empty((n, spec.n_subcarriers), dtype=np.complex128)
    slot_syms[:, :spec.n_pilot] = spec.pilot_symbol
    slot_syms[:, spec.n_pilot:] = symbols
    amp = np.sqrt(alloc.phi / L)  # [n, K]
    constituents = amp[:, :, None] * slot_syms[:, :, None] * codes[:, None, :]
    return SuperposedSignal(spec=spec, alloc=alloc, codes=codes, symbols=symbols,
                            chips=constituents.sum(axis=0), constituents=constituents)


@dataclass(frozen=True)
class FrameObservation:
    user_id: int
    y_pilot: np.ndarray  # [n_pilot, L] shared pilot-phase observation
    y_data: np.ndarray   # [n_data, L] this receiver's data-phase chips
    spec: FrameSpec
    truth: FrameTruth


def receive(frame: SuperposedSignal, chan: ChannelRealization, noise_power_w: float,
            rng) -> list[FrameObservation]:
    """Push the frame through the channel.

    Data slots pass through each receiver's own composite gain with
    independent noise.  The pilot phase is the code-multiplexed sounding
    observation: every user's pilot contribution arrives through that
    user's channel (reciprocity view), so one shared pilot vector serves
    all estimators.
    """
    rng = as_generator(rng)
    spec = frame.spec
    g = chan.composite_gain
    pilot_tx = frame.constituents[:, :spec.n_pilot, :]  # [n, n_pilot, L]
    y_pilot = add_awgn(np.einsum("n,nkl->kl", g, pilot_tx), noise_power_w, rng)
    data_tx = frame.chips[spec.n_pilot:, :]
    truth = FrameTruth(symbols=frame.symbols.copy(), composite_gain=g.copy())
    obs = []
    for u in range(spec.n_users):
        y_data = add_awgn(g[u] * data_tx, noise_power_w, rng)
        obs.append(FrameObservation(user_id=u, y_pilot=y_pilot, y_data=y_data,
                                    spec=spec, truth=truth))
    return obs


def correlate(y: np.ndarray, code: np.ndarray) -> np.ndarray:
    """Zero-lag correlator <y, code> along the chip axis."""
    return np.asarray(y) @ np.asarray(code, dtype=np.float64)


@dataclass(frozen=True)
class DetectedSymbols:
    user_id: int
    symbols: np.ndarray        # [n_data] hard +-1 decisions (0 if undetectable)
    reliabilities: np.ndarray  # [n_data] normalized correlator magnitudes
    statistics: np.ndarray     # [n_data] complex correlator outputs
    trial_index: int = -1


@dataclass(frozen=True)
class SicResult:
    receiver_id: int
    order: tuple[int, ...]
    detected: dict[int, DetectedSymbols] = field(default_factory=dict)
    undetectable: bool = False

    def own(self) -> DetectedSymbols:
        return self.detected[self.receiver_id]


def sic_order(alloc: PowerAllocation) -> tuple[int, ...]:
    """Descending total allocated power; ties broken by ascending user id."""
    power = alloc.user_power()
    return tuple(sorted(range(len(power)), key=lambda u: (-power[u], u)))


def sic_detect(obs: FrameObservation, codes: np.ndarray, alloc: PowerAllocation,
               chan_est: np.ndarray, trial_index: int = -1) -> SicResult:
    """Successive cancellation at one receiver.

    Stronger-or-equal users are detected and subtracted in ``sic_order``
    until this receiver's own symbols are decoded.  All stages use the
    receiver's own channel estimate — in a downlink every constituent
    arrives through the same channel.  A zero estimate makes the receiver
    undetectable; it is flagged and skipped rather than raising.
    """
    codes = np.asarray(codes, dtype=np.float64)
    chan_est = np.asarray(chan_est, dtype=np.complex128)
    spec = obs.spec
    L = codes.shape[1]
    me = obs.user_id
    h = chan_est[me]
    order = sic_order(alloc)
    n_data = spec.n_data
    if h == 0:
        empty = DetectedSymbols(user_id=me, symbols=np.zeros(n_data),
                                reliabilities=np.zeros(n_data),
                                statistics=np.zeros(n_data, dtype=np.complex128),
                                trial_index=trial_index)
        return SicResult(receiver_id=me, order=order, detected={me: empty},
                         undetectable=True)
    y = obs.y_data.copy()
    data_phi = alloc.phi[:, spec.n_pilot:]
    detected: dict[int, DetectedSymbols] = {}
    for uid in order:
        stats = correlate(y, codes[uid])
        sym = np.sign(np.real(np.conj(h) * stats))
        sym[sym == 0] = 1.0
        scale = np.sqrt(data_phi[uid] * L) * np.abs(h)
        rel = np.where(scale > 0, np.abs(stats) / np.where(scale > 0, scale, 1.0), 0.0)
        detected[uid] = DetectedSymbols(user_id=uid, symbols=sym, reliabilities=rel,
                                        statistics=stats, trial_index=trial_index)
        if uid == me:
            break
        # reconstruct through this receiver's channel and cancel
        recon = h * np.sqrt(data_phi[uid] / L)[:, None] * sym[:, None] * codes[uid][None, :]
        y = y - recon
    return SicResult(receiver_id=me, order=order, detected=detected)
