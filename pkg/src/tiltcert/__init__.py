"""Numerical certificates for self-testing from tilted CHSH violations."""

__version__ = "0.1.0"
