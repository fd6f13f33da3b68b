"""Simulation and analysis of optically addressed molecular triplet spins."""

__version__ = "0.1.0"
