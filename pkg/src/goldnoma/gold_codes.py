"""Gold sequence generation and periodic correlation analysis.

m-sequences come from Fibonacci LFSRs described by the exponents of their
characteristic polynomial.  A preferred pair of m-sequences of degree m
yields a family of 2^m + 1 Gold codes whose pairwise periodic
cross-correlation takes only the three values {-1, -t(m), t(m) - 2} with
t(m) = 2^floor((m+2)/2) + 1.  Families are validated against that bound by
brute force at construction time, so a bad tap set cannot produce a silently
broken family.

Chips are bipolar: bit 0 maps to +1, bit 1 maps to -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Degree -> (taps1, taps2), validated preferred pairs for the supported sizes.
PREFERRED_PAIRS = {
    5: ((5, 2), (5, 4, 3, 2)),
    6: ((6, 1), (6, 5, 2, 1)),
    7: ((7, 3), (7, 3, 2, 1)),
}


def gold_t(m: int) -> int:
    """Three-valued correlation parameter t(m) = 2^floor((m+2)/2) + 1."""
    return 2 ** ((m + 2) // 2) + 1


def expected_ccf_values(m: int) -> frozenset[int]:
    t = gold_t(m)
    return frozenset((-1, -t, t - 2))


@dataclass(frozen=True)
class LfsrSpec:
    """Fibonacci LFSR: degree, characteristic-polynomial exponents, seed.

    ``taps`` are the nonzero polynomial exponents excluding the constant
    term, e.g. (5, 2) for x^5 + x^2 + 1.  ``seed`` holds the first
    ``degree`` output bits; it must be nonzero.
    """

    degree: int
    taps: tuple[int, ...]
    seed: tuple[int, ...] = ()

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError(f"degree must be >= 2, got {self.degree}")
        taps = tuple(sorted(set(int(t) for t in self.taps), reverse=True))
        if not taps or any(t < 1 or t > self.degree for t in taps):
            raise ValueError(f"taps must be a nonempty subset of 1..{self.degree}, got {self.taps}")
        if self.degree not in taps:
            raise ValueError(f"taps must include the degree {self.degree}, got {self.taps}")
        seed = tuple(int(b) for b in self.seed) if self.seed else (1,) * self.degree
        if len(seed) != self.degree or any(b not in (0, 1) for b in seed):
            raise ValueError(f"seed must be {self.degree} bits, got {self.seed}")
        if not any(seed):
            raise ValueError("seed must be nonzero")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "seed", seed)

    @property
    def period(self) -> int:
        return 2 ** self.degree - 1


def _lfsr_bits(spec: LfsrSpec) -> tuple[np.ndarray, int]:
    """Run the register for one nominal period; return (bits, measured period).

    The measured period is found by state-recurrence detection, which is the
    check that rejects non-primitive polynomials.
    """
    m, L = spec.degree, spec.period
    # s[n] = s[n-m] xor (xor over s[n-(m-t)] for interior taps t)
    lags = [m] + [m - t for t in spec.taps if t < m]
    bits = np.empty(L + m, dtype=np.int64)
    bits[:m] = spec.seed
    for n in range(m, L + m):
        b = 0
        for lag in lags:
            b ^= bits[n - lag]
        bits[n] = b
    start = np.array(spec.seed)
    period = L
    for n in range(1, L):
        if np.array_equal(bits[n:n + m], start):
            period = n
            break
    return bits[:L], period


def generate_m_sequence(spec: LfsrSpec) -> np.ndarray:
    """Full-period bipolar m-sequence for ``spec``.

    Raises ValueError when the register state recurs early (the polynomial
    is not primitive for this seed), reporting the measured period.
    """
    bits, period = _lfsr_bits(spec)
    if period != spec.period:
        raise ValueError(
            f"taps {spec.taps} are not primitive for degree {spec.degree}: "
            f"sequence period {period} < {spec.period}"
        )
    return (1 - 2 * bits).astype(np.int8)


@dataclass(frozen=True)
class GoldCode:
    chips: np.ndarray  # bipolar +-1, length 2^m - 1
    family_index: int
    pair: tuple[LfsrSpec, LfsrSpec]

    def __post_init__(self):
        chips = np.asarray(self.chips, dtype=np.int8)
        if chips.ndim != 1 or not np.all(np.abs(chips) == 1):
            raise ValueError("chips must be a 1-d bipolar (+-1) vector")
        object.__setattr__(self, "chips", chips)

    @property
    def length(self) -> int:
        return self.chips.shape[0]


@dataclass(frozen=True)
class CorrelationProfile:
    """Unnormalized periodic cross-correlation over all cyclic lags."""

    values: np.ndarray  # theta(tau) for tau = 0..L-1
    max_abs: int
    normalized_max: float

    def value_counts(self) -> dict[int, int]:
        vals, counts = np.unique(self.values, return_counts=True)
        return dict(zip(vals.tolist(), counts.tolist()))


def _chips(code) -> np.ndarray:
    return code.chips if isinstance(code, GoldCode) else np.asarray(code)


def cross_correlation(a, b) -> CorrelationProfile:
    """Periodic CCF theta(tau) = sum_n a[n] * b[(n+tau) mod L], exact integers."""
    ca = _chips(a).astype(np.int64)
    cb = _chips(b).astype(np.int64)
    if ca.shape != cb.shape:
        raise ValueError(f"length mismatch: {ca.shape[0]} vs {cb.shape[0]}")
    L = ca.shape[0]
    # circulant correlation as one matmul over the stacked cyclic shifts
    idx = (np.arange(L)[:, None] + np.arange(L)[None, :]) % L
    vals = cb[idx] @ ca
    max_abs = int(np.max(np.abs(vals)))
    return CorrelationProfile(values=vals, max_abs=max_abs, normalized_max=max_abs / L)


def _validate_family(chips: np.ndarray, m: int) -> None:
    """Brute-force three-valued check of every distinct pair, via FFT.

    chips: [family_size, L].  Raises when any pair's CCF leaves the allowed
    set {-1, -t(m), t(m)-2}.
    """
    allowed = expected_ccf_values(m)
    spectra = np.fft.rfft(chips.astype(np.float64), axis=1)
    n = chips.shape[0]
    L = chips.shape[1]
    for i in range(n):
        cc = np.fft.irfft(np.conj(spectra[i][None, :]) * spectra[i + 1:], n=L, axis=1)
        vals = set(np.unique(np.rint(cc)).astype(int).tolist())
        if not vals <= allowed:
            j = i + 1 + int(np.argmax([
                not set(np.unique(np.rint(row)).astype(int).tolist()) <= allowed for row in cc
            ]))
            raise ValueError(
                f"family pair ({i},{j}) violates the three-valued bound for m={m}: {sorted(vals - allowed)}"
            )


def gold_family(m: int, pair: tuple[LfsrSpec, LfsrSpec] | None = None,
                validate: bool = True) -> list[GoldCode]:
    """Construct the 2^m + 1 member Gold family for degree m.

    Ordering: [base1, base2, base1 xor shift_k(base2) for k = 0..L-1].
    The default pairs cover m in {5, 6, 7}; any explicitly supplied pair is
    still brute-force validated unless ``validate`` is disabled.
    """
    if pair is None:
        if m not in PREFERRED_PAIRS:
            raise ValueError(f"no built-in preferred pair for m={m}; supported: {sorted(PREFERRED_PAIRS)}")
        t1, t2 = PREFERRED_PAIRS[m]
        pair = (LfsrSpec(m, t1), LfsrSpec(m, t2))
    s1, s2 = pair
    if s1.degree != m or s2.degree != m:
        raise ValueError("pair degrees must match m")
    base1 = generate_m_sequence(s1)
    base2 = generate_m_sequence(s2)
    L = 2 ** m - 1
    members = [base1, base2]
    for k in range(L):
        members.append((base1 * np.roll(base2, -k)).astype(np.int8))
    chips = np.stack(members)
    if validate:
        _validate_family(chips, m)
    return [GoldCode(chips=c, family_index=i, pair=pair) for i, c in enumerate(chips)]


# canonical construction name used by the drivers and docs
generate_gold_family = gold_family


def family_matrix(family: Sequence[GoldCode]) -> np.ndarray:
    """Stack family chips into an [n_codes, L] float array (simulation-friendly)."""
    return np.stack([c.chips for c in family]).astype(np.float64)


@dataclass(frozen=True)
class CodeAssignment:
    indices: tuple[int, ...]           # user i -> family index
    reused: bool
    shared: dict[int, tuple[int, ...]] = field(default_factory=dict)  # family index -> users


def assign_codes(family: Sequence[GoldCode], n_users: int) -> CodeAssignment:
    """Round-robin assignment: user i gets family member i mod family_size."""
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    size = len(family)
    if size == 0:
        raise ValueError("family must be nonempty")
    indices = tuple(i % size for i in range(n_users))
    groups: dict[int, list[int]] = {}
    for user, idx in enumerate(indices):
        groups.setdefault(idx, []).append(user)
    shared = {idx: tuple(users) for idx, users in groups.items() if len(users) > 1}
    return CodeAssignment(indices=indices, reused=bool(shared), shared=shared)


def format_family(family: Sequence[GoldCode]) -> str:
    """Plain-text export: header line, then one code per line of +-1 chips."""
    pair = family[0].pair
    m = pair[0].degree
    taps_str = "/".join(",".join(str(t) for t in spec.taps) for spec in pair)
    lines = [f"# gold m={m} pair={taps_str}"]
    for code in family:
        lines.append(" ".join(str(int(c)) for c in code.chips))
    return "\n".join(lines) + "\n"


def export_family(family: Sequence[GoldCode], path) -> None:
    with open(path, "w") as fh:
        fh.write(format_family(family))


def correlation_report(family: Sequence[GoldCode], max_pairs: int | None = None,
                       seed: int = 0) -> list[dict]:
    """Per-pair correlation summary rows (exhaustive, or sampled when large)."""
    n = len(family)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if max_pairs is not None and len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        keep = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[k] for k in sorted(keep)]
    rows = []
    for i, j in pairs:
        prof = cross_correlation(family[i], family[j])
        rows.append({
            "i": i, "j": j,
            "max_abs": prof.max_abs,
            "normalized_max": prof.normalized_max,
            "values": sorted(prof.value_counts().items()),
        })
    return rows
