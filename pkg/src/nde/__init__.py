"""Irregular LDPC degree-distribution design for the binary erasure channel."""
__version__ = "0.1.0"
