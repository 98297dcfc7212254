"""HTTP service exposing the simulation drivers; the CLI is a thin client."""

from .app import create_app  # noqa: F401
