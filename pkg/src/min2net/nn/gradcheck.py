"""Central finite-difference gradient checking.

Run in 64-bit: the step size (1e-5, scaled by coordinate magnitude) leaves
no usable precision in float32.
"""

from __future__ import annotations

import numpy as np


def grad_check(fn, x, *, step=1e-5, n_coords=None, seed=0):
    """Compare the analytic gradient of a scalar map against central
    finite differences.

    ``fn(x) -> (value, grad)`` must return the scalar and its full analytic
    gradient with respect to ``x``.  Returns the worst relative error over
    the checked coordinates (all of them unless ``n_coords`` limits the
    check to a random subset).  A non-finite analytic gradient is reported
    as ``inf``.
    """
    x = np.asarray(x, dtype=np.float64)
    _, analytic = fn(x)
    analytic = np.asarray(analytic, dtype=np.float64)
    if analytic.shape != x.shape:
        raise ValueError(
            f"analytic gradient shape {analytic.shape} != input shape {x.shape}")
    if not np.all(np.isfinite(analytic)):
        return np.inf

    flat = x.reshape(-1)
    coords = np.arange(flat.size)
    if n_coords is not None and n_coords < flat.size:
        rng = np.random.default_rng(seed)
        coords = rng.choice(flat.size, size=n_coords, replace=False)

    worst = 0.0
    aflat = analytic.reshape(-1)
    for i in coords:
        h = step * max(1.0, abs(flat[i]))
        orig = flat[i]
        flat[i] = orig + h
        f_plus, _ = fn(x)
        flat[i] = orig - h
        f_minus, _ = fn(x)
        flat[i] = orig
        numeric = (f_plus - f_minus) / (2 * h)
        denom = max(abs(aflat[i]), abs(numeric), 1.0)
        worst = max(worst, abs(aflat[i] - numeric) / denom)
    return worst
