"""Contextual false-data-injection detection for power-grid injection series."""

from gridwatch._accel import backend_name

__version__ = "0.1.0"

__all__ = ["__version__", "backend_name"]
