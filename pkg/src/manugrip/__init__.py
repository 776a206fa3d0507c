"""Reconstruct hand-object manipulation from glove streams and simulate its physical effects."""

__version__ = "0.1.0"
