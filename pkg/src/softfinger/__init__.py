"""Reduced-order simulation and ON-OFF control of a pneumatic soft finger."""

__version__ = "0.1.0"
