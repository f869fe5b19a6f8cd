"""Quantum work statistics in the two-point-measurement scheme for driven spin-1/2 systems."""

__version__ = "0.1.0"
