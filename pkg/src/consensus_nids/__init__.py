"""Consensus-based distributed network intrusion detection simulator."""

__version__ = "0.1.0"
