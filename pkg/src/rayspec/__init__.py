"""Variational eigensolver for differential operators with neural-network ansatz functions."""

__version__ = "0.1.0"
