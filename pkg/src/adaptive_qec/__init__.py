"""Adaptive syndrome extraction for error-detection-concatenated HGP codes."""

__version__ = "0.1.0"
