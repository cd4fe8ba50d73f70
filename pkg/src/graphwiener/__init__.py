"""Localized matrices on graphs and their weighted stability."""

__version__ = "0.1.0"
