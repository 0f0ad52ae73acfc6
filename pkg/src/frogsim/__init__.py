"""Frog model simulation and time-constant estimation on the integer lattice."""

__version__ = "0.1.0"
