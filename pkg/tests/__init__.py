"""homodyne-forge test suite."""
