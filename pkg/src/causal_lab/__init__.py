"""Identify the causal order and memory of a two-party quantum environment."""

__version__ = "0.1.0"
