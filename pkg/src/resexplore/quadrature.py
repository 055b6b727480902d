"""Exact integration of piecewise-linear functions against lam * exp(-lam * s).

The exploration operator needs integrals of the form

    I(x) = int_0^x f(y) lam exp(-lam (x - y)) dy

where f is only known at grid nodes and is interpolated linearly.  On one
segment [y0, y0 + h] the contribution is ``w0 * f(y0) + w1 * f(y0 + h)`` with
closed-form weights, and I obeys the recursion

    I(x_i) = exp(-lam h_i) I(x_{i-1}) + w0_i f(x_{i-1}) + w1_i f(x_i).
"""

from __future__ import annotations

import numpy as np

__all__ = ["segment_weights", "exp_kernel_integral"]


def segment_weights(h, lam: float):
    """Weights (decay, w0, w1) for one segment of length h.

    ``decay`` is exp(-lam h).  ``w0`` multiplies the value at the far end of
    the segment (distance h from the evaluation point), ``w1`` the near end.
    """
    h = np.asarray(h, dtype=float)
    z = lam * h
    one_minus = -np.expm1(-z)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(z > 1e-8, one_minus / np.where(z > 0, z, 1.0), 1.0 - z / 2.0)
        w1 = np.where(z > 1e-4, 1.0 - ratio, z / 2.0 - z * z / 6.0 + z**3 / 24.0)
    w0 = one_minus - w1
    return np.exp(-z), w0, w1


def exp_kernel_integral(y_nodes, values, lam: float):
    """Integral of the linear interpolant of ``values`` against the kernel.

    ``y_nodes`` is increasing with ``y_nodes[0] == 0``; the evaluation point
    is ``x = y_nodes[-1]`` and the kernel weight at node y is
    ``lam * exp(-lam * (x - y))``.  ``values`` has the node axis first; any
    trailing axes are integrated independently.
    """
    y = np.asarray(y_nodes, dtype=float)
    f = np.asarray(values, dtype=float)
    acc = np.zeros(f.shape[1:])
    for i in range(1, len(y)):
        decay, w0, w1 = segment_weights(y[i] - y[i - 1], lam)
        acc = decay * acc + w0 * f[i - 1] + w1 * f[i]
    return acc
