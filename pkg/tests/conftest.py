"""Shared test configuration."""

from hypothesis import HealthCheck, settings

# Property tests run numpy-heavy bodies whose first call pays compilation
# and cache warmup; a wall-clock deadline would flake on that, not on bugs.
settings.register_profile(
    "suite", max_examples=50, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")
