"""Discrete-event simulator for clusters with byte-addressable persistent memory."""

__version__ = "0.1.0"
