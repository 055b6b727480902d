"""Value iteration on the dynamic programming principle, used as an oracle.

Round n allows one more exploration episode than round n - 1:

    V^n(x, R) = sup_{0 <= Q <= R, theta >= 0}  Ut(theta, Q) + e^{-r theta} M V^{n-1}(x, R - Q)

where Ut(theta, Q) is the best utility from consuming Q over [0, theta].
Substituting s = 1 - exp(-r theta / (1 - alpha)) turns the bracket into
U(Q) s**(1-alpha) + M V^{n-1} (1-s)**(1-alpha), a concave function of s on
[0, 1] maximised by golden-section search.  Q is scanned over the R nodes and
refined by a second golden-section search.

The exploration operator here uses composite Simpson quadrature on the
piecewise-linear-in-x interpolant, deliberately independent of the closed-form
weights used by :mod:`resexplore.solver`.  Everything is slow and vectorised
only as far as needed for small grids.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import model
from .errors import ConvergenceWarning, DomainError, GridError
from .model import ModelParams
from .solver import SolverGrid

__all__ = ["lagrange_utility", "golden_max", "inner_sup", "dpp_operator", "dpp_fixed_point"]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def lagrange_utility(params: ModelParams, theta, Q):
    """Best discounted utility from consuming Q units over [0, theta].

    (Q**alpha / alpha) ((1-alpha)/r)**(1-alpha) (1 - exp(-r theta/(1-alpha)))**(1-alpha);
    theta = inf gives the Hotelling value U(Q).
    """
    al, r = params.alpha, params.r
    theta = np.asarray(theta, dtype=float)
    s = -np.expm1(-r * theta / (1.0 - al))
    return model.hotelling_value(params, Q) * s ** (1.0 - al)


def golden_max(f, lo, hi, iters: int = 80):
    """Elementwise maximum of a unimodal ``f`` on [lo, hi], endpoints included.

    ``lo`` and ``hi`` are arrays of the same shape; returns (argmax, max).
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - _INV_PHI * (hi - lo)
        new_d = lo + _INV_PHI * (hi - lo)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        f_new = f(np.where(left, new_c, new_d))
        fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
        c, d = c_next, d_next
    mid = 0.5 * (lo + hi)
    cands = [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))]
    best_x, best_f = cands[0]
    for xv, fv in cands[1:]:
        better = fv > best_f
        best_x = np.where(better, xv, best_x)
        best_f = np.where(better, fv, best_f)
    return best_x, best_f


def inner_sup(params: ModelParams, uq, mv):
    """sup over s in [0, 1] of uq s**(1-alpha) + mv (1-s)**(1-alpha), by golden section."""
    beta = 1.0 - params.alpha
    uq = np.asarray(uq, dtype=float)
    mv = np.maximum(np.asarray(mv, dtype=float), 0.0)
    f = lambda s: uq * s**beta + mv * (1.0 - s) ** beta  # noqa: E731
    _, best = golden_max(f, np.zeros(np.broadcast(uq, mv).shape), np.ones(np.broadcast(uq, mv).shape))
    return best


def _simpson_operator(params: ModelParams, table: np.ndarray, xs: np.ndarray, i: int, m: int, ncols: int):
    """M applied to ``table`` at x = xs[i] for the first ``ncols`` columns.

    ``table[l, j]`` holds V at (xs[l], j * r_step); columns j + m are used.
    """
    lam = params.lam
    x = xs[i]
    acc = np.zeros(ncols)
    for l in range(1, i + 1):
        y0, y1 = xs[l - 1], xs[l]
        f0, f1 = table[l - 1, m:m + ncols], table[l, m:m + ncols]
        panels = 4
        ts = np.linspace(0.0, 1.0, 2 * panels + 1)
        w = np.ones_like(ts)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= (y1 - y0) / (6.0 * panels)
        for t, wt in zip(ts, w):
            y = y0 + t * (y1 - y0)
            acc += wt * ((1.0 - t) * f0 + t * f1) * lam * math.exp(-lam * (x - y))
    return acc


def dpp_operator(params: ModelParams, prev: np.ndarray, xs: np.ndarray, r_step: float, m: int, ncols: int):
    """One round of the DPP map on the first ``ncols`` R columns."""
    R = r_step * np.arange(ncols)
    U = model.hotelling_value(params, R)
    lam, k = params.lam, params.k
    out = np.empty((len(xs), ncols))
    out[0] = U
    for i in range(1, len(xs)):
        x = xs[i]
        integral = _simpson_operator(params, prev, xs, i, m, ncols)
        mv = integral + U * math.exp(-lam * x) - k * (-math.expm1(-lam * x)) / lam
        out[i] = _maximise_row(params, R, mv)
    return out


def _maximise_row(params: ModelParams, R: np.ndarray, mv: np.ndarray) -> np.ndarray:
    """sup over 0 <= Q <= R of the inner supremum, for every R node."""
    n = len(R)
    # scan: candidate remaining reserves R' = R[j] <= R[t]
    Rt = R[:, None]
    Rp = R[None, :]
    valid = Rp <= Rt + 1e-15
    uq = model.hotelling_value(params, np.where(valid, Rt - Rp, 0.0))
    vals = inner_sup(params, uq, np.broadcast_to(mv[None, :], (n, n)))
    vals = np.where(valid, vals, -np.inf)
    j = np.argmax(vals, axis=1)
    best = vals[np.arange(n), j]
    # refine R' on the neighbouring cells with MV interpolated linearly
    lo = R[np.maximum(j - 1, 0)]
    hi = np.minimum(R[np.minimum(j + 1, n - 1)], R)

    def obj(rp):
        mvp = np.interp(rp, R, mv)
        return inner_sup(params, model.hotelling_value(params, np.maximum(R - rp, 0.0)), mvp)

    _, refined = golden_max(obj, lo, np.maximum(hi, lo))
    return np.maximum(best, refined)


def dpp_fixed_point(params: ModelParams, grid: SolverGrid, n_rounds: int, warn_tol: float = 1e-3) -> np.ndarray:
    """Iterate the DPP map ``n_rounds`` times from U; returns V^n on ``grid``.

    Emits :class:`ConvergenceWarning` if the last round still moves some node
    by more than ``warn_tol`` relative.
    """
    if params.k <= 0.0:
        raise DomainError("dpp_fixed_point needs k > 0")
    if n_rounds < 1:
        raise DomainError("n_rounds must be at least 1")
    h = grid.r_step
    mf = params.a / h
    m = int(round(mf))
    if m < 1 or abs(mf - m) > 1e-9 * max(mf, 1.0):
        raise GridError("find size a must be a whole number of R steps")
    xs = grid.x_nodes
    nr = len(grid.r_nodes)
    # round j is only needed on the range it feeds: nr + (n_rounds - j) * m columns
    width = nr + n_rounds * m
    prev = np.tile(model.hotelling_value(params, h * np.arange(width)), (len(xs), 1))
    last = prev[:, :nr]
    for rnd in range(1, n_rounds + 1):
        cols = nr + (n_rounds - rnd) * m
        cur = dpp_operator(params, prev, xs, h, m, cols)
        last, prev = prev[:, :nr], cur
    new = prev[:, :nr]
    pos = new > 0
    change = np.max(np.abs(new[pos] - last[pos]) / new[pos]) if np.any(pos) else 0.0
    if change > warn_tol:
        warnings.warn(
            f"value iteration still moving by {change:.3g} relative after {n_rounds} rounds",
            ConvergenceWarning,
            stacklevel=2,
        )
    return new.copy()
