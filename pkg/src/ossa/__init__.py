"""Numeric verdicts for selfadjoint operator spaces in M_d(C)."""

__version__ = "0.1.0"
