"""Numerical laboratory for the Klein-Gordon-Zakharov and Dirac-Klein-Gordon systems
with a large wave or Klein-Gordon field in three space dimensions."""

__version__ = "0.1.0"
