"""Phase-space evolution of multi-population distributions."""

__version__ = "0.1.0"
