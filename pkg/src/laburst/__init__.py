"""Key-moment discovery in timestamped message streams via per-token burst classification."""

__version__ = "0.1.0"
MODEL_SCHEMA_VERSION = 1
