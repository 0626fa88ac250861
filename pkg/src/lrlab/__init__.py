"""Commutator-growth bounds and their numerical checks for Lindblad chains."""

__version__ = "0.1.0"
