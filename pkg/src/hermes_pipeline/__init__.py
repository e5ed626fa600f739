"""Automated publication of research software with rich, provenance-tagged metadata."""

__version__ = "0.1.0"
