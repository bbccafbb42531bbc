"""Central finite-difference gradient check."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward, no_grad


def gradcheck(f, x: Tensor, h=1e-5, coords=None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps ``x`` to a scalar tensor. The error at each coordinate is
    ``|analytic - numeric| / max(1e-8, |numeric|)``. ``coords`` optionally
    restricts the check to a subset of flat indices.
    """
    x.requires_grad = True
    x.grad = None
    out = f(x)
    if out.size != 1:
        raise ValueError(f"gradcheck needs a scalar-valued function, got shape {out.shape}")
    backward(out)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad
    analytic = analytic.reshape(-1).copy()
    x.grad = None

    flat = x.data.reshape(-1)
    if coords is None:
        coords = range(flat.size)
    worst = 0.0
    with no_grad():
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            fp = float(f(x).data)
            flat[c] = orig - h
            fm = float(f(x).data)
            flat[c] = orig
            numeric = (fp - fm) / (2.0 * h)
            err = abs(analytic[c] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
    return worst
