"""Synthetic multi-tier city parcel networks and containerized consolidation planning."""

__version__ = "0.1.0"
