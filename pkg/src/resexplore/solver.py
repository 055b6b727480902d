"""Value surface V(x, R), exploration operator MV and the critical frontier R*(x).

The scheme marches in unexplored area x.  MV(x, .) only looks at V on
[0, x], so the row at x = 0 (the Hotelling value U) seeds everything and
each new row is obtained from the rows below it:

1. MV(x_i, R) is the exact integral of the piecewise-linear-in-x interpolant
   of V(., R + a) against lam * exp(-lam * s), plus the exhaustion and cost
   terms.  The near segment touches V(x_i, R + a) itself; that value is found
   by a short fixed-point iteration (contraction factor about lam * dx / 2).
2. The frontier is the first reserve level where g = d/dR MV**(1/alpha)
   drops below ``c_star``.  Node values of g come from central differences,
   the crossing inside the bracketing cell from a cubic Hermite interpolant
   of MV**(1/alpha).
3. Below the frontier V = MV; above it V**(1/alpha) continues linearly with
   slope ``c_star`` from the frontier anchor, which solves the consumption
   ODE u*(V_R) = r V exactly.

The reserve grid must be uniform with ``a`` an integer number of steps, so
R + a always lands on a node.  Columns past the last node are filled with
the closed-form extension, which is exact there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .errors import DomainError, FrontierNotBracketed, GridError, NoRoot, NonMonotoneFrontier
from .model import ModelParams
from .quadrature import exp_kernel_integral, segment_weights
from .roots import bisect, geometric_bracket, log_bisect

__all__ = [
    "SolverGrid",
    "Frontier",
    "ValueSurface",
    "default_grid",
    "frontier_at_zero",
    "lower_bound_curve",
    "upper_bound_reserve",
    "consumption_extension",
    "exploration_operator",
    "apply_exploration_operator",
    "frontier_indicator",
    "solve",
    "value_at",
    "price_at",
]

_PICARD_TOL = 1e-13
_PICARD_MAXITER = 200


@dataclass(frozen=True)
class SolverGrid:
    """Discretisation of the (x, R) domain.

    ``x_nodes`` may be non-uniform; ``r_nodes`` must be uniform with spacing
    ``r_step``.  Both start at 0.
    """

    x_nodes: np.ndarray
    r_nodes: np.ndarray
    x_step: float
    r_step: float

    def __post_init__(self):
        x = np.array(self.x_nodes, dtype=float)
        r = np.array(self.r_nodes, dtype=float)
        if x.ndim != 1 or r.ndim != 1 or len(x) < 1 or len(r) < 3:
            raise GridError("need at least one x node and three R nodes")
        if x[0] != 0.0 or r[0] != 0.0:
            raise GridError("x_nodes and r_nodes must start at 0")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(r) <= 0):
            raise GridError("grid nodes must be strictly increasing")
        if not np.allclose(np.diff(r), self.r_step, rtol=1e-9, atol=0.0):
            raise GridError("r_nodes must be uniform with spacing r_step")
        x.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "x_nodes", x)
        object.__setattr__(self, "r_nodes", r)
        object.__setattr__(self, "x_step", float(self.x_step))
        object.__setattr__(self, "r_step", float(self.r_step))

    @classmethod
    def uniform(cls, x_max: float, r_max: float, x_step: float, r_step: float) -> "SolverGrid":
        """Uniform grid; the last nodes reach at least ``x_max`` / ``r_max``."""
        nx = max(int(math.ceil(x_max / x_step - 1e-9)), 0)
        nr = max(int(math.ceil(r_max / r_step - 1e-9)), 2)
        x = np.linspace(0.0, x_max, nx + 1) if nx > 0 else np.zeros(1)
        r = r_step * np.arange(nr + 1)
        return cls(x, r, x_max / nx if nx else x_step, r_step)

    @property
    def x_max(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def r_max(self) -> float:
        return float(self.r_nodes[-1])

    def refined(self, factor: int = 2) -> "SolverGrid":
        """Same domain with both steps divided by ``factor``."""
        x = self.x_nodes
        xs = [x[:1]]
        for i in range(1, len(x)):
            xs.append(np.linspace(x[i - 1], x[i], factor + 1)[1:])
        r_step = self.r_step / factor
        nr = (len(self.r_nodes) - 1) * factor
        return SolverGrid(np.concatenate(xs), r_step * np.arange(nr + 1), self.x_step / factor, r_step)


def default_grid(
    params: ModelParams, x_max: float = 1.0, x_step=None, r_step=None, r_max=None, x_levels: int = 4
) -> SolverGrid:
    """Grid resolving both the discovery scale 1/lam and the find size a.

    Nominal steps are ``min(0.01, 0.2/lam)`` in x and ``min(0.01, a/50)`` in R;
    the R step is shrunk so that ``a`` is a whole number of steps.  The R range
    covers the x = 0 frontier anchor (an upper bound for the whole frontier,
    which decreases in x) with a 10% margin, plus ``a`` and one step.

    The first x cell is split geometrically into ``x_levels`` extra nodes at
    ``x_step / 2**j``.  R*(x) leaves R*(0) with slope of order one, so these
    nodes are what lets the frontier near x = 0 be compared with its anchor.
    """
    if x_max < 0:
        raise GridError("x_max must be non-negative")
    if x_step is None:
        x_step = min(0.01, 0.2 / params.lam)
    if r_step is None:
        r_step = min(0.01, params.a / 50.0)
    r_step = params.a / math.ceil(params.a / r_step - 1e-9)
    if r_max is None:
        r_max = 1.1 * frontier_at_zero(params) + params.a + r_step
    grid = SolverGrid.uniform(x_max, r_max, x_step, r_step)
    x = grid.x_nodes
    if len(x) > 1 and x_levels > 0:
        extra = x[1] * 0.5 ** np.arange(x_levels, 0, -1)
        x = np.concatenate([x[:1], extra, x[1:]])
        grid = SolverGrid(x, grid.r_nodes, grid.x_step, grid.r_step)
    return grid


# ---------------------------------------------------------------------------
# Closed forms and a-priori bounds
# ---------------------------------------------------------------------------


def _anchor_equation(params: ModelParams, y: float) -> float:
    """Left side minus one of the R*(0) equation, as a function of y = a / R0."""
    al, eps = params.alpha, params.epsilon
    lg = math.log1p(y)
    # alpha((1+y)^(alpha-1) - 1) + (1-alpha)((1+y)^alpha - 1), free of cancellation
    core = al * math.expm1((al - 1.0) * lg) + (1.0 - al) * math.expm1(al * lg)
    return core - (1.0 - al) * eps * y**al


def frontier_at_zero(params: ModelParams, rtol: float = 1e-10) -> float:
    """Limit of the frontier as the unexplored area vanishes.

    Solves alpha(1+y)^(alpha-1) + (1-alpha)(1+y)^alpha - (1-alpha) eps y^alpha = 1
    for y = a / R0 by geometric bracketing and bisection.  The bracket reaches
    y = 1e300 because with small alpha and epsilon near 1 the root sits at
    R0 many decades below a.
    """
    eps = params.epsilon
    if not 0.0 < eps < 1.0:
        raise NoRoot(f"the anchor equation needs 0 < epsilon < 1, got {eps}")
    f = lambda y: _anchor_equation(params, y)  # noqa: E731
    lo, hi = geometric_bracket(f, 1e-12, 1e300, factor=4.0)
    y = log_bisect(f, lo, hi, rtol=rtol)
    return params.a / y


def lower_bound_curve(params: ModelParams, x: float) -> float:
    """Reserve level below which exploring is certainly optimal.

    Largest R with
    (1 - e^{-lam x}) (U(R+a) - k/lam) - (e^{alpha lam x/(1-alpha)} - e^{-lam x}) U(R) > 0,
    and its x -> 0 limit (1-alpha)(U(R+a) - k/lam) - U(R) > 0 at x = 0.
    """
    al, lam, k = params.alpha, params.lam, params.k
    U = lambda R: model.hotelling_value(params, R)  # noqa: E731
    if x < 0:
        raise DomainError("x must be non-negative")
    if x == 0.0:
        f = lambda R: (1.0 - al) * (U(R + params.a) - k / lam) - U(R)  # noqa: E731
    else:
        z = lam * x
        rho = (math.exp(al * z / (1.0 - al)) - math.exp(-z)) / -math.expm1(-z)
        f = lambda R: U(R + params.a) - k / lam - rho * U(R)  # noqa: E731
    if f(1e-300) <= 0.0:
        return 0.0
    hi = params.a
    while f(hi) > 0.0:
        hi *= 2.0
    return bisect(f, 0.0, hi, rtol=1e-12)


def upper_bound_reserve(params: ModelParams, x_max: float) -> float:
    """A-priori reserve level above which no state with x <= x_max explores.

    The sufficient condition int_0^x {a U'(R)(1 + lam (x-h)) - k/lam} lam e^{-lam h} dh < 0
    integrates to a U'(R) lam x < (k/lam)(1 - e^{-lam x}); the ratio
    (1 - e^{-z})/z is decreasing, so x = x_max is the binding case.  The bound
    is loose (often orders of magnitude above the true frontier) and grows
    without limit in x_max.
    """
    if params.k == 0.0:
        return math.inf
    if x_max <= 0.0:
        return 0.0
    z = params.lam * x_max
    target = params.k * (-math.expm1(-z)) / (params.lam**2 * params.a * x_max)
    return model.hotelling_reserves_from_price(params, target)


def consumption_extension(params: ModelParams, anchor_value: float, r_star: float, R):
    """Value above the frontier: (anchor**(1/alpha) + c_star (R - r_star))**alpha."""
    R = np.asarray(R, dtype=float)
    al = params.alpha
    out = (anchor_value ** (1.0 / al) + params.c_star * (R - r_star)) ** al
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Surface types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frontier:
    """Critical reserve level per x node.

    ``r_star[0]`` and ``p_star[0]`` hold the x -> 0 limit (``r0`` and U'(r0)).
    ``v_star`` is the value at the frontier, the anchor of the closed form
    above it, and ``intercept`` is V**(1/alpha) - c_star R there (constant in R
    throughout the consumption region).
    """

    x_nodes: np.ndarray
    r_star: np.ndarray
    p_star: np.ndarray
    v_star: np.ndarray
    intercept: np.ndarray
    r0: float

    def r_star_at(self, x):
        return np.interp(x, self.x_nodes, self.r_star)


@dataclass(frozen=True)
class ValueSurface:
    """Solved V and MV tables with their frontier.

    ``v[i, j]`` and ``mv[i, j]`` are values at ``(grid.x_nodes[i], grid.r_nodes[j])``.
    """

    params: ModelParams
    grid: SolverGrid
    v: np.ndarray
    mv: np.ndarray
    frontier: Frontier
    picard_iterations: int = 0

    @property
    def exploration_mask(self) -> np.ndarray:
        """True at nodes with R <= R*(x); the x = 0 row has no exploration region."""
        mask = self.grid.r_nodes[None, :] <= self.frontier.r_star[:, None]
        mask[0, :] = False
        return mask

    def value_at(self, x, R):
        return value_at(self, x, R)

    def price_at(self, x, R):
        return price_at(self, x, R)

    def price_table(self) -> np.ndarray:
        """Shadow price at every node."""
        out = np.empty_like(self.v)
        for i, x in enumerate(self.grid.x_nodes):
            with np.errstate(divide="ignore"):
                if i == 0:
                    r = self.grid.r_nodes
                    out[0] = np.where(r > 0, self.params.alpha * self.params.derived.u_prefactor
                                      * np.where(r > 0, r, 1.0) ** (self.params.alpha - 1.0), np.inf)
                else:
                    out[i] = price_at(self, x, self.grid.r_nodes)
        return out


def _check_x(surface: ValueSurface, x: float) -> float:
    x = float(x)
    xmax = surface.grid.x_max
    if x < 0.0 or x > xmax * (1.0 + 1e-12) + 1e-15:
        raise GridError(f"x = {x} outside the solved range [0, {xmax}]")
    return min(x, xmax)


def _bilinear(surface: ValueSurface, table: np.ndarray, x: float, R: np.ndarray, offset=None) -> np.ndarray:
    """Bilinear interpolation of ``table``; with ``offset`` (a function of R),
    ``table - offset`` is interpolated and ``offset(R)`` added back."""
    xs = surface.grid.x_nodes
    h = surface.grid.r_step
    i = int(np.searchsorted(xs, x, side="right") - 1)
    i = min(max(i, 0), len(xs) - 1)
    if i == len(xs) - 1:
        row_lo, row_hi, wx = table[i], table[i], 0.0
    else:
        wx = (x - xs[i]) / (xs[i + 1] - xs[i])
        row_lo, row_hi = table[i], table[i + 1]
    nr = len(surface.grid.r_nodes)
    pos = np.clip(R / h, 0.0, nr - 1)
    j = np.minimum(np.floor(pos).astype(int), nr - 2)
    wr = pos - j
    if offset is None:
        o0 = o1 = 0.0
    else:
        o0, o1 = offset(surface.grid.r_nodes[j]), offset(surface.grid.r_nodes[j + 1])
    lo = (row_lo[j] - o0) * (1 - wr) + (row_lo[j + 1] - o1) * wr
    hi = (row_hi[j] - o0) * (1 - wr) + (row_hi[j + 1] - o1) * wr
    out = lo * (1 - wx) + hi * wx
    return out if offset is None else out + offset(R)


def _frontier_state(surface: ValueSurface, x: float):
    fr = surface.frontier
    rs = float(np.interp(x, fr.x_nodes, fr.r_star))
    b = float(np.interp(x, fr.x_nodes, fr.intercept))
    return rs, b


def value_at(surface: ValueSurface, x, R):
    """V(x, R): closed form above the frontier; below it, U(R) plus a bilinear
    interpolant of V - U, which removes the square-root-like singularity of U
    at R = 0 and keeps V >= U between nodes."""
    x = _check_x(surface, x)
    Ra = np.asarray(R, dtype=float)
    scalar = Ra.ndim == 0
    Ra = np.atleast_1d(Ra)
    if np.any(Ra < 0):
        raise DomainError("reserves must be non-negative")
    params = surface.params
    if x == 0.0:
        out = model.hotelling_value(params, Ra)
    else:
        rs, b = _frontier_state(surface, x)
        cons = Ra > rs
        out = np.empty_like(Ra)
        out[cons] = (b + params.c_star * Ra[cons]) ** params.alpha
        if np.any(~cons):
            hot = lambda q: model.hotelling_value(params, q)  # noqa: E731
            out[~cons] = _bilinear(surface, surface.v, x, Ra[~cons], offset=hot)
    return float(out[0]) if scalar else out


# states this close to R* (relative) are priced as on the frontier, so that
# round-off in a closed-form reserve path ending at R* stays on the smooth side
FRONTIER_RTOL = 1e-10


def price_at(surface: ValueSurface, x, R):
    """Shadow price dV/dR.

    At and above the frontier the derivative of the closed form (V_R is
    continuous across R*, and the closed form is exact there; reserves within
    FRONTIER_RTOL of R* count as on it), below it a
    central difference (one step of the R grid) of the bilinearly
    interpolated MV.
    """
    x = _check_x(surface, x)
    Ra = np.asarray(R, dtype=float)
    scalar = Ra.ndim == 0
    Ra = np.atleast_1d(Ra)
    params = surface.params
    if x == 0.0:
        out = model.hotelling_price(params, Ra)
        out = np.atleast_1d(out)
    else:
        if np.any(Ra < 0):
            raise DomainError("reserves must be non-negative")
        rs, b = _frontier_state(surface, x)
        cons = Ra >= rs * (1.0 - FRONTIER_RTOL)
        out = np.empty_like(Ra)
        al, c = params.alpha, params.c_star
        out[cons] = al * c * (b + c * Ra[cons]) ** (al - 1.0)
        if np.any(~cons):
            h = surface.grid.r_step
            Re = Ra[~cons]
            lo = np.maximum(Re - h, 0.0)
            hi = Re + h
            mv_hi = _bilinear(surface, surface.mv, x, hi)
            mv_lo = _bilinear(surface, surface.mv, x, lo)
            out[~cons] = (mv_hi - mv_lo) / (hi - lo)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Exploration operator and frontier test
# ---------------------------------------------------------------------------


def exploration_operator(params: ModelParams, value_fn, x: float, R, x_nodes) -> np.ndarray:
    """MV(x, R) for an arbitrary value function.

    ``value_fn(y, Rq)`` returns V(y, Rq) for an array ``Rq``.  The integral
    uses the linear interpolant of V(., R + a) through ``x_nodes`` (those below
    x, plus x itself).
    """
    R = np.atleast_1d(np.asarray(R, dtype=float))
    if x < 0:
        raise DomainError("x must be non-negative")
    if np.any(R < 0):
        raise DomainError("reserves must be non-negative")
    U = model.hotelling_value(params, R)
    if x == 0.0:
        return U
    ys = np.asarray(x_nodes, dtype=float)
    ys = np.concatenate([ys[ys < x], [x]])
    if ys[0] != 0.0:
        ys = np.concatenate([[0.0], ys])
    vals = np.stack([np.asarray(value_fn(y, R + params.a), dtype=float) for y in ys])
    integral = exp_kernel_integral(ys, vals, params.lam)
    lam, k = params.lam, params.k
    return integral + U * math.exp(-lam * x) - k * (-math.expm1(-lam * x)) / lam


def apply_exploration_operator(surface: ValueSurface, x: float, R):
    """MV(x, R) computed from a solved surface."""
    x = _check_x(surface, x)
    out = exploration_operator(surface.params, lambda y, Rq: value_at(surface, y, Rq), x, R,
                               surface.grid.x_nodes)
    return float(out[0]) if np.ndim(R) == 0 else out


def frontier_indicator(surface: ValueSurface, x: float, R: float) -> float:
    """g(x, R) = d/dR MV(x, R)**(1/alpha) by a central difference of one R step.

    The state explores iff g >= c_star.
    """
    h = surface.grid.r_step
    lo = max(R - h, 0.0)
    hi = R + h
    mv = apply_exploration_operator(surface, x, np.array([lo, hi]))
    if np.any(mv <= 0):
        raise DomainError("MV must be positive to evaluate the frontier test")
    G = mv ** (1.0 / surface.params.alpha)
    return float((G[1] - G[0]) / (hi - lo))


def _node_slopes(G: np.ndarray, h: float) -> np.ndarray:
    g = np.empty_like(G)
    g[1:-1] = (G[2:] - G[:-2]) / (2.0 * h)
    # second-order one-sided differences at the ends
    g[0] = (-3.0 * G[0] + 4.0 * G[1] - G[2]) / (2.0 * h)
    g[-1] = (3.0 * G[-1] - 4.0 * G[-2] + G[-3]) / (2.0 * h)
    return g


def _locate_frontier(G: np.ndarray, R: np.ndarray, h: float, c: float):
    """Frontier on one row from the node values of MV**(1/alpha).

    Returns (r_star, G at r_star).  Scans for the first node where the slope
    falls below ``c`` and bisects the derivative of the cubic Hermite
    interpolant on the bracketing cell.
    """
    g = _node_slopes(G, h)
    below = np.flatnonzero(g < c)
    if len(below) == 0:
        raise FrontierNotBracketed("frontier test never drops below c_star; extend the R grid")
    j = int(below[0])
    if j == 0:
        raise FrontierNotBracketed("frontier test is below c_star already at R = 0")
    G0, G1, m0, m1 = G[j - 1], G[j], g[j - 1], g[j]

    def dp(t):
        return ((6 * t * t - 6 * t) * G0 + (3 * t * t - 4 * t + 1) * h * m0
                + (-6 * t * t + 6 * t) * G1 + (3 * t * t - 2 * t) * h * m1) / h - c

    t = bisect(dp, 0.0, 1.0, xtol=1e-12, rtol=0.0)
    h00 = 2 * t**3 - 3 * t**2 + 1
    h10 = t**3 - 2 * t**2 + t
    h01 = -2 * t**3 + 3 * t**2
    h11 = t**3 - t**2
    G_star = h00 * G0 + h10 * h * m0 + h01 * G1 + h11 * h * m1
    return float(R[j - 1] + t * h), float(G_star)


def _shift_index(params: ModelParams, grid: SolverGrid) -> int:
    m = params.a / grid.r_step
    mi = int(round(m))
    if mi < 1 or abs(m - mi) > 1e-9 * max(m, 1.0):
        raise GridError(f"find size a = {params.a} must be a whole number of R steps ({grid.r_step})")
    return mi


def solve(params: ModelParams, grid: SolverGrid, monotone_tol=None) -> ValueSurface:
    """March in x to obtain V, MV and the frontier on ``grid``.

    Raises :class:`FrontierNotBracketed` if a row has no sign change of
    g - c_star on the grid, and :class:`NonMonotoneFrontier` if R* rises with
    x by more than ``monotone_tol`` (default: a tenth of the R step).
    """
    if params.k <= 0.0:
        raise DomainError("solve needs k > 0; with free exploration use full_information_value")
    m = _shift_index(params, grid)
    r0 = frontier_at_zero(params)
    if grid.r_max < r0:
        raise GridError(f"R grid ends at {grid.r_max:g}, below the frontier anchor {r0:g}")
    if monotone_tol is None:
        monotone_tol = grid.r_step / 10.0

    xs, R, h = grid.x_nodes, grid.r_nodes, grid.r_step
    nx, nr = len(xs), len(R)
    al, lam, k, c = params.alpha, params.lam, params.k, params.c_star
    R_ext = h * np.arange(nr + m)
    U_ext = model.hotelling_value(params, R_ext)
    U = U_ext[:nr]

    V = np.empty((nx, nr + m))
    MV = np.empty((nx, nr))
    V[0] = U_ext
    MV[0] = U
    r_star = np.empty(nx)
    v_star = np.empty(nx)
    r_star[0] = r0
    v_star[0] = model.hotelling_value(params, r0)
    integral = np.zeros(nr)
    picard_total = 0

    for i in range(1, nx):
        x = xs[i]
        decay, w0, w1 = (float(w) for w in segment_weights(xs[i] - xs[i - 1], lam))
        base = decay * integral + w0 * V[i - 1, m:] + U * math.exp(-lam * x) - k * (-math.expm1(-lam * x)) / lam
        row = V[i - 1].copy()
        for it in range(_PICARD_MAXITER):
            mv = base + w1 * row[m:]
            if np.any(mv <= 0):
                raise DomainError(f"MV is not positive at x = {x:g}")
            G = mv ** (1.0 / al)
            rs, Gs = _locate_frontier(G, R, h, c)
            new = np.empty_like(row)
            new[:nr] = mv
            cons = R_ext > rs
            new[cons] = (Gs + c * (R_ext[cons] - rs)) ** al
            change = float(np.max(np.abs(new - row) / new))
            row = new
            if change < _PICARD_TOL:
                break
        picard_total += it + 1
        V[i] = row
        MV[i] = base + w1 * row[m:]
        r_star[i] = rs
        v_star[i] = Gs**al
        if rs > r_star[i - 1] + monotone_tol:
            raise NonMonotoneFrontier(
                f"R* rises from {r_star[i - 1]:.6g} to {rs:.6g} at x = {x:g}; refine the grid"
            )
        integral = decay * integral + w0 * V[i - 1, m:] + w1 * V[i, m:]

    p_star = al * c * (v_star ** (1.0 / al)) ** (al - 1.0)
    intercept = v_star ** (1.0 / al) - c * r_star
    frontier = Frontier(xs.copy(), r_star, p_star, v_star, intercept, r0)
    v_tab = V[:, :nr].copy()
    for arr in (v_tab, MV, r_star, p_star, v_star, intercept):
        arr.setflags(write=False)
    return ValueSurface(params, grid, v_tab, MV, frontier, picard_total)
