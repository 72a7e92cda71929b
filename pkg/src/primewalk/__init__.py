"""Exact and simulated hitting times of dice walks on target sets of integers."""

__version__ = "0.1.0"
