"""Fractional-domain interference mitigation for FMCW radar."""
__version__ = "0.1.0"
