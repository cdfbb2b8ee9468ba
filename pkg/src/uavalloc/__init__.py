"""Uplink power allocation and system-level simulation for dense aerial UEs."""

__version__ = "0.1.0"
