"""Discretized path-integral laboratory."""

__version__ = "0.1.0"
