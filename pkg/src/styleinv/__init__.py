"""Desk-scale style-based video generation via a temporally modulated
inversion encoder."""

__version__ = "0.1.0"
