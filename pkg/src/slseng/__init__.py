"""Stochastic-geometry engine for spatially aware secondary spectrum sharing."""
__version__ = "0.1.0"
