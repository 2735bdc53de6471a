"""Closed-loop tests for homodyne-forge.

These tests synthesize acceptance-scale datasets and take a few minutes.

To run:
    pytest tests/integration -v

    # Or skip them in a quick local loop
    HOMODYNE_SKIP_SLOW=1 pytest
"""
