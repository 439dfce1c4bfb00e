"""Classify SQL queries into CPU-time and peak-memory cost buckets from their text."""

__version__ = "0.1.0"
