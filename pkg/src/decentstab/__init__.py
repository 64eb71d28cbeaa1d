"""Decentralized time-varying output-feedback stabilization toolkit."""

__version__ = "0.1.0"
