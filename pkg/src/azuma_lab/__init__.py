"""Multiplicative Azuma bounds, adaptive adversaries and the (P, M)-recycling game."""

__version__ = "0.1.0"
