"""Reaction-diffusion laboratory for asymptotic symmetry on radial Neumann domains."""

__version__ = "0.1.0"
