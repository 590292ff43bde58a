"""Input checks shared by the estimator wrappers."""
import numpy as np
from sklearn.utils import check_array

from .propagation import ChannelGains


def check_gains(X):
    """Return a float ``(n_ues, n_cells)`` gain matrix, rejecting non-positive entries.

    Accepts a :class:`ChannelGains` or any 2-D array-like.
    """
    if isinstance(X, ChannelGains):
        X = X.beta
    beta = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if np.any(beta <= 0):
        raise ValueError("gains must be strictly positive")
    return beta


def check_cell_index(y, n_ues, n_cells):
    """Validate a per-UE cell index vector."""
    y = np.asarray(y)
    if y.shape != (n_ues,):
        raise ValueError(f"expected {n_ues} cell indices, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("cell indices must be integers")
        y = y.astype(int)
    if y.size and (y.min() < 0 or y.max() >= n_cells):
        raise ValueError("cell index out of range")
    return y
