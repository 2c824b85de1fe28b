"""Continuum-wise expansivity and entropy tools for suspension flows."""

__version__ = "0.1.0"
