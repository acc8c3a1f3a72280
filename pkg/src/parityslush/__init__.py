"""Sparse random parity matrices: Warning Propagation, slush and frozen variables."""

__version__ = "0.1.0"
