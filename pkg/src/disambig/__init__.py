"""Ambiguity-resolving code generation: probe, ask, correct."""

__version__ = "0.1.0"
