"""Contextual probability models that reproduce EPR spin correlations, with
Bell, consistency, no-signaling and causal-protocol checks."""

__version__ = "0.1.0"
