"""Simulation and correlation analysis of quantum-optics style detection events."""

__version__ = "0.1.0"
