"""Poisson Boolean model in hyperbolic space: simulation and numerical bounds."""

__version__ = "0.1.0"
