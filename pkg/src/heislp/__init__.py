"""Snowflake embeddings of the Heisenberg group into L_p."""

__version__ = "0.1.0"
