"""Desk-scale laboratory for correlation boxes, jamming geometry and modular energy."""

__version__ = "0.1.0"
