"""Unit tests for homodyne-forge."""
