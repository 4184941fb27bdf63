"""Graph-aware late chunking and retrieval engine for scientific articles."""

__version__ = "0.1.0"
