"""Explainable neural subgraph matching with learnable multi-hop attention."""

__version__ = "0.1.0"
