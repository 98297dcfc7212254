"""Link-level downlink NOMA simulator with Gold-sequence user separation."""

__version__ = "0.1.0"
