"""
Utility functions for homodyne-forge.

Path management and small numeric helpers shared by the CLI commands.
"""

from pathlib import Path
from typing import Union

import numpy as np

# =============================================================================
# Path Utilities
# =============================================================================


def ensure_directory(path: Union[str, Path]) -> Path:
    """
    Ensure a directory exists, creating it if necessary.

    Args:
        path: Directory path to ensure exists

    Returns:
        Path object for the directory.

    Raises:
        OSError: If directory cannot be created.
    """
    path_obj = Path(path)
    path_obj.mkdir(parents=True, exist_ok=True)
    return path_obj


# =============================================================================
# Grids
# =============================================================================


def phase_space_grid(points: int, extent: float) -> tuple[np.ndarray, np.ndarray]:
    """Square grid over [−extent, extent]² as (X, Y) meshes, x varying fastest.

    Example:
        >>> X, Y = phase_space_grid(3, 1.0)
        >>> X[0].tolist()
        [-1.0, 0.0, 1.0]
    """
    if points < 2:
        raise ValueError(f"A grid needs at least 2 points per axis, got: {points}")
    if extent <= 0.0:
        raise ValueError(f"Grid extent must be positive, got: {extent}")
    axis = np.linspace(-extent, extent, points)
    X, Y = np.meshgrid(axis, axis)
    return X, Y
