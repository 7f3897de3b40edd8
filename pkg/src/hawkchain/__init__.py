"""Analogue black-hole simulations on a tunable XY qubit chain."""

__version__ = "0.1.0"
