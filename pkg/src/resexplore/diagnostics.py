"""Residual and consistency checks for a solved surface.

Every check stays on one side of the frontier when it differentiates, since
V is only C^1 across it.  Stencils are three-point (second order) wherever the
region leaves room, two-point otherwise.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import model, solver
from .model import ModelParams
from .solver import ValueSurface

__all__ = [
    "ResidualReport",
    "hjb_residuals",
    "residual_shrink",
    "sandwich_violation",
    "concavity_violation",
    "frontier_bound_gaps",
    "expansion_residual",
]

ROUNDOFF_FLOOR = 1e-10


@dataclass(frozen=True)
class ResidualReport:
    """Worst-case relative residuals of the HJB system on the grid nodes.

    ``max_classic_residual`` combines the two halves of the classic form:
    the absolute residual in the exploration region and its positive part in
    the consumption region, both scaled by the sum of the magnitudes of the
    terms.
    """

    max_consumption_residual: float
    max_exploration_residual: float
    max_classic_residual: float
    smooth_pasting_gap: float

    def as_dict(self) -> dict:
        return asdict(self)


def _deriv3(t, f, t0):
    """Derivative at t0 of the quadratic through three points (any order)."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    d = 0.0
    for i in range(3):
        o = [j for j in range(3) if j != i]
        num = (t0 - t[o[0]]) + (t0 - t[o[1]])
        den = (t[i] - t[o[0]]) * (t[i] - t[o[1]])
        d += f[i] * num / den
    return d


def _deriv_in_window(t, f, idx, ok):
    """Derivative at t[idx] using neighbours that satisfy ``ok``.

    Tries the centred triple, then backward, then forward, then two points.
    Returns nan if no neighbour qualifies.
    """
    n = len(t)
    for trip in ((idx - 1, idx, idx + 1), (idx - 2, idx - 1, idx), (idx, idx + 1, idx + 2)):
        if trip[0] >= 0 and trip[2] < n and all(ok[i] for i in trip):
            return _deriv3(t[list(trip)], f[list(trip)], t[idx])
    for nb in (idx - 1, idx + 1):
        if 0 <= nb < n and ok[nb]:
            return (f[nb] - f[idx]) / (t[nb] - t[idx])
    return math.nan


def _extended_rows(surface: ValueSurface, extra: int) -> np.ndarray:
    """V on the R grid extended by ``extra`` columns via the closed form."""
    g = surface.grid
    nr = len(g.r_nodes)
    R_ext = g.r_step * np.arange(nr + extra)
    out = np.empty((len(g.x_nodes), nr + extra))
    out[:, :nr] = surface.v
    p = surface.params
    out[0, nr:] = model.hotelling_value(p, R_ext[nr:])
    b = surface.frontier.intercept
    for i in range(1, len(g.x_nodes)):
        out[i, nr:] = (b[i] + p.c_star * R_ext[nr:]) ** p.alpha
    return out


def _consumption_residual(surface: ValueSurface) -> float:
    p = surface.params
    R = surface.grid.r_nodes
    worst = 0.0
    # x = 0: V = U there and u*(U') = rU is an identity, so only round-off remains.
    pos = R > 0
    U = model.hotelling_value(p, R[pos])
    res0 = np.abs(model.conjugate(p, model.hotelling_price(p, R[pos])) - p.r * U) / (p.r * U)
    worst = max(worst, float(np.max(res0)))
    for i in range(1, len(surface.grid.x_nodes)):
        rs = surface.frontier.r_star[i]
        row = surface.v[i]
        ok = R > rs
        for j in np.flatnonzero(ok):
            vr = _deriv_in_window(R, row, j, ok)
            if not math.isfinite(vr) or vr <= 0:
                continue
            rv = p.r * row[j]
            worst = max(worst, abs(model.conjugate(p, vr) - rv) / rv)
    return worst


def _exploration_residual(surface: ValueSurface) -> float:
    """|V - MV| / V with MV recomputed through the general operator."""
    mask = surface.exploration_mask
    R = surface.grid.r_nodes
    worst = 0.0
    for i, x in enumerate(surface.grid.x_nodes):
        js = np.flatnonzero(mask[i])
        if len(js) == 0:
            continue
        mv = solver.apply_exploration_operator(surface, x, R[js])
        v = surface.v[i, js]
        worst = max(worst, float(np.max(np.abs(v - mv) / v)))
    return worst


def _smooth_pasting_gap(surface: ValueSurface) -> float:
    """Relative jump of V_R at R*(x) between the two one-sided extrapolations.

    The left side works on MV, which is smooth in R and equals V up to the
    frontier, using the last three nodes at or below R* (the first three when
    the frontier is within two steps of R = 0).  MV carries the term
    e^{-lam x} U(R), whose slope is unbounded at R = 0; it is removed before
    differencing and its exact derivative added back.
    """
    p = surface.params
    R = surface.grid.r_nodes
    worst = 0.0
    for i in range(1, len(surface.grid.x_nodes)):
        x = surface.grid.x_nodes[i]
        rs = surface.frontier.r_star[i]
        above = np.flatnonzero(R > rs)[:3]
        if len(above) < 3:
            continue
        below = np.flatnonzero(R <= rs)[-3:]
        if len(below) < 3:
            below = np.arange(3)
        damp = math.exp(-p.lam * x)
        smooth = surface.mv[i, below] - damp * model.hotelling_value(p, R[below])
        left = _deriv3(R[below], smooth, rs) + damp * model.hotelling_price(p, rs)
        right = _deriv3(R[above], surface.v[i, above], rs)
        worst = max(worst, abs(left - right) / surface.frontier.p_star[i])
    return worst


def _classic_residual(surface: ValueSurface) -> float:
    p = surface.params
    g = surface.grid
    m = int(round(p.a / g.r_step))
    V = _extended_rows(surface, m)
    xs, R = g.x_nodes, g.r_nodes
    nr = len(R)
    rs = surface.frontier.r_star
    # Region labels per node; the x = 0 row joins the region it borders.
    explore = R[None, :] <= rs[:, None]
    worst = 0.0
    for j in range(nr):
        col = V[:, j]
        for i in range(1, len(xs)):
            ok = explore[:, j] == explore[i, j]
            vx = _deriv_in_window(xs, col, i, ok)
            if not math.isfinite(vx):
                continue
            jump = p.lam * (V[i, j + m] - V[i, j])
            res = jump - vx - p.k
            scale = p.k + abs(jump) + abs(vx)
            worst = max(worst, abs(res) / scale if explore[i, j] else max(res, 0.0) / scale)
    return worst


def hjb_residuals(surface: ValueSurface) -> ResidualReport:
    """Evaluate the four residual measures of the HJB system."""
    return ResidualReport(
        max_consumption_residual=_consumption_residual(surface),
        max_exploration_residual=_exploration_residual(surface),
        max_classic_residual=_classic_residual(surface),
        smooth_pasting_gap=_smooth_pasting_gap(surface),
    )


def residual_shrink(coarse: ResidualReport, fine: ResidualReport, floor: float = ROUNDOFF_FLOOR) -> dict:
    """Ratio coarse / fine per field.

    A field already below ``floor`` on the fine grid sits at round-off and is
    reported as ``inf`` (it cannot shrink further in any meaningful sense).
    """
    out = {}
    for name, c in coarse.as_dict().items():
        f = getattr(fine, name)
        out[name] = math.inf if f <= floor else c / f
    return out


def sandwich_violation(surface: ValueSurface) -> float:
    """Largest relative breach of U(R) <= V(x, R) <= E[U(R + a N_x)] (0 if none)."""
    p = surface.params
    R = surface.grid.r_nodes
    U = model.hotelling_value(p, R)
    worst = 0.0
    for i, x in enumerate(surface.grid.x_nodes):
        v = surface.v[i]
        upper = model.full_information_value(p, float(x), R)
        scale = np.maximum(v, 1e-300)
        worst = max(worst, float(np.max(np.maximum(U - v, 0.0) / scale)))
        worst = max(worst, float(np.max(np.maximum(v - upper, 0.0) / scale)))
    return worst


def concavity_violation(surface: ValueSurface) -> float:
    """Largest positive second difference of V in R, relative to V."""
    v = surface.v
    d2 = v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]
    return float(np.max(np.maximum(d2, 0.0) / v[:, 1:-1]))


def frontier_bound_gaps(surface: ValueSurface) -> tuple[float, float]:
    """(min of R* - Rbar, min of Rcheck - R*) over the x nodes; both >= 0 when the bounds hold."""
    p = surface.params
    fr = surface.frontier
    lower = np.array([solver.lower_bound_curve(p, float(x)) for x in fr.x_nodes])
    upper = solver.upper_bound_reserve(p, surface.grid.x_max)
    return float(np.min(fr.r_star - lower)), float(upper - np.max(fr.r_star))


def expansion_residual(params: ModelParams, R):
    """Small-x frontier expansion; zero at R*(0) and O(x) at R*(x).

        ((1-alpha)/alpha) [lam (U(R+a) - U(R)) - k] / U(R) + lam [U'(R+a) - U'(R)] / U'(R)
    """
    al, lam, a, k = params.alpha, params.lam, params.a, params.k
    U = lambda q: model.hotelling_value(params, q)  # noqa: E731
    Up = lambda q: model.hotelling_price(params, q)  # noqa: E731
    return (1.0 - al) / al * (lam * (U(R + a) - U(R)) - k) / U(R) + lam * (Up(R + a) - Up(R)) / Up(R)
