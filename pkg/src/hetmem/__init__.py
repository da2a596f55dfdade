"""Scratchpad-vs-cache data allocation for heterogeneous memory pools."""

__version__ = "0.1.0"
