"""Friction-aware wealth accounting for limit order books."""

__version__ = "0.1.0"
