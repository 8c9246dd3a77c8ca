"""Local AI-text detector scoring service behind the shared wire contract."""

__version__ = "0.1.0"
