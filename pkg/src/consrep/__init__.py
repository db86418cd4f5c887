"""Fault-tolerant process calculus, consensus encoding, standard-form
representatives, and the explicit-state verifier tying them together."""

__version__ = "0.1.0"
