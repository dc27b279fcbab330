"""Simulation and passivity analysis of AC multi-grids coupled by AC-AC
interlinking converters."""

__version__ = "0.1.0"
