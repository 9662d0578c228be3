"""Simulation toolkit for generating and distilling optical entanglement."""
__version__ = "0.1.0"
