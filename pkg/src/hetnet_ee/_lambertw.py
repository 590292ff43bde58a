"""Principal branch of the Lambert W function via Halley iteration."""
import math

import numpy as np

_BRANCH_POINT = -1.0 / math.e


def lambertw0(x, rtol=1e-12, max_iter=100):
    """Principal branch ``W0`` of the Lambert W function.

    Solves ``w * exp(w) = x`` for ``w >= -1`` using Halley's method.

    Parameters
    ----------
    x : float or array_like
        Argument, must satisfy ``x >= -1/e``.
    rtol : float
        Relative step tolerance at which the iteration stops.
    max_iter : int
        Iteration cap; reaching it raises ``RuntimeError``.

    Returns
    -------
    float or numpy.ndarray
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < _BRANCH_POINT - 1e-15) or np.any(~np.isfinite(arr)):
        raise ValueError("lambertw0 is only defined for finite x >= -1/e")
    out = np.vectorize(_scalar, otypes=[float])(arr, rtol, max_iter)
    return float(out) if out.ndim == 0 else out


def _scalar(x, rtol, max_iter):
    if x == 0.0:
        return 0.0
    if x <= _BRANCH_POINT:
        return -1.0
    # starting guesses: branch-point series near -1/e, log asymptotics for large x
    if x < -0.25:
        p = math.sqrt(2.0 * (math.e * x + 1.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        w = math.log1p(x)
    else:
        lx = math.log(x)
        w = lx - math.log(lx)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        if wp1 == 0.0:
            return w
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= rtol * max(abs(w), 1e-300):
            return w
    raise RuntimeError(f"lambertw0 did not converge for x={x!r}")
