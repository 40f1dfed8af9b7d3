"""Structured insight mining from customer reviews."""

__version__ = "0.1.0"
