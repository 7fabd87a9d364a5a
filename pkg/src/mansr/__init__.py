"""Multi-scale Attention Network super-resolution kit."""

__version__ = "0.1.0"
