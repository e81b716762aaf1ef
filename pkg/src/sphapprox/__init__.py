"""Nonlinear approximation and function spaces on the sphere via needlet frames
and nested tree partitions."""

__version__ = "0.1.0"
