"""Garside normal forms, penetration distance and growth-rate analysis."""

__version__ = "0.1.0"
