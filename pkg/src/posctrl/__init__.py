"""Positivity-constrained boundary controllability for transport and heat networks."""

__version__ = "0.1.0"
