"""Deterministic per-trial random streams.

Every Monte Carlo trial draws from four independent substreams keyed by
(master_seed, trial, purpose).  Purpose-keyed streams keep realizations
paired across compared systems: e.g. the no-spreading baseline consumes
nothing from the CODES stream, yet sees the identical channel, symbols,
and noise as the spread system at the same trial index.
"""

from __future__ import annotations

import numpy as np

PURPOSE_CHANNEL = 0
PURPOSE_CODES = 1
PURPOSE_SYMBOLS = 2
PURPOSE_NOISE = 3
PURPOSE_WALK = 4


def trial_rng(master_seed: int, trial: int, purpose: int) -> np.random.Generator:
    """Independent, non-overlapping stream for one (trial, purpose) pair."""
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(trial, purpose)))
