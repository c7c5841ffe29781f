"""Partition-weighted local-constant kernel regression for arbitrary designs."""

__version__ = "0.1.0"
