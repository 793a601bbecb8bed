"""Distributed primary-user detection and identification for cognitive radio networks."""

__version__ = "0.1.0"
