"""Patch-based spatiotemporal presentation attack detection on LSCI captures."""

__version__ = "0.1.0"
