"""Liquid deliberation: delegation, expert committees and budgeted corrections."""

__version__ = "0.1.0"
