"""Simulation of the optimal bang-bang strategy on a solved surface.

A path alternates two kinds of pieces:

* consumption segments, where the state sits strictly inside the consumption
  region, x is frozen, and reserves run down along a closed-form curve until
  they reach R*(x);
* exploration episodes, which take no calendar time: exponential(lam)
  spacings are drawn in explored distance, each spacing shorter than the
  remaining area is a find of size ``a``, and the episode ends as soon as
  reserves exceed R*(x) or the area is used up (exhaustion).

After exhaustion the path follows the Hotelling solution forever.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import model, solver
from .errors import DomainError, RegionError, TimeOutOfRange
from .solver import ValueSurface

__all__ = [
    "CONSUMPTION_START",
    "EXPLORATION_EPISODE",
    "EXHAUSTION",
    "RngStream",
    "ConsumptionSegment",
    "PathEvent",
    "Path",
    "consumption_segment",
    "exploration_episode",
    "simulate_path",
    "sample_path",
]

CONSUMPTION_START = "ConsumptionStart"
EXPLORATION_EPISODE = "ExplorationEpisode"
EXHAUSTION = "Exhaustion"


class RngStream:
    """Counter-based stream of exponential spacings.

    The Philox key is ``(seed, stream_id)``, so every stream is fixed by its
    two integers alone and streams can be generated in any order.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise DomainError("seed and stream_id must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spacing(self, lam: float) -> float:
        """Next exponential spacing with rate ``lam``."""
        return float(self._gen.standard_exponential()) / lam

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


@dataclass(frozen=True)
class ConsumptionSegment:
    """Pure consumption at fixed x from ``start`` for ``duration`` time units.

    Along the segment c(t) = c0 exp(-r t / (1 - alpha)), the price grows as
    price0 exp(r t) and reserves follow :meth:`reserves`.
    """

    start: float
    duration: float
    x: float
    r_start: float
    c0: float
    price0: float
    r: float
    alpha: float

    @property
    def end(self) -> float:
        return self.start + self.duration

    def _tau(self, t):
        return np.asarray(t, dtype=float) - self.start

    def reserves(self, t):
        g = (1.0 - self.alpha) / self.r
        return self.r_start - g * self.c0 * (-np.expm1(-self._tau(t) / g))

    def consumption(self, t):
        return self.c0 * np.exp(-self.r * self._tau(t) / (1.0 - self.alpha))

    def price(self, t):
        return self.price0 * np.exp(self.r * self._tau(t))


@dataclass(frozen=True)
class PathEvent:
    """One instantaneous event on a path.

    ``spacings`` are the exponential draws consumed by the episode, kept so
    the event can be replayed.  ``discounted_cost`` is k times the explored
    area, discounted to time 0.
    """

    kind: str
    time: float
    x_before: float
    x_after: float
    r_before: float
    r_after: float
    finds: int
    price_before: float
    price_after: float
    discounted_cost: float
    spacings: tuple = ()


@dataclass(frozen=True)
class Path:
    """Event-structured history of one strategy realisation."""

    params: model.ModelParams
    seed: int
    stream_id: int
    x0: float
    r0: float
    horizon: float
    events: tuple
    consumption_segments: tuple
    exhaustion_time: Optional[float] = None

    @property
    def exhausted(self) -> bool:
        return self.exhaustion_time is not None

    @property
    def total_discounted_cost(self) -> float:
        return math.fsum(e.discounted_cost for e in self.events)

    @property
    def total_finds(self) -> int:
        return sum(e.finds for e in self.events)


class _Strategy:
    """Scalar view of the frontier used while simulating.

    ``scale`` multiplies R*(x) for decision purposes only; 1 is the optimal
    strategy, anything else a deliberately wrong one (prices still come from
    the surface).
    """

    def __init__(self, surface: ValueSurface, scale: float = 1.0):
        self.surface = surface
        self.params = surface.params
        fr = surface.frontier
        self.xs = [float(v) for v in fr.x_nodes]
        self.rs = [float(v) for v in fr.r_star]
        self.bs = [float(v) for v in fr.intercept]
        self.scale = float(scale)

    def _interp(self, ys, x):
        xs = self.xs
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        i = bisect.bisect_right(xs, x) - 1
        w = (x - xs[i]) / (xs[i + 1] - xs[i])
        return ys[i] * (1.0 - w) + ys[i + 1] * w

    def true_frontier(self, x):
        return self._interp(self.rs, x)

    def frontier(self, x):
        return self.scale * self._interp(self.rs, x)

    def price(self, x, R):
        p = self.params
        if x <= 0.0:
            return model.hotelling_price(p, R)
        if R >= self.true_frontier(x) * (1.0 - solver.FRONTIER_RTOL):
            b = self._interp(self.bs, x)
            return p.alpha * p.c_star * (b + p.c_star * R) ** (p.alpha - 1.0)
        return float(solver.price_at(self.surface, x, R))


def _segment(strategy: _Strategy, x: float, r_start: float, start: float) -> ConsumptionSegment:
    p = strategy.params
    al, r = p.alpha, p.r
    price0 = strategy.price(x, r_start)
    c0 = price0 ** (1.0 / (al - 1.0))
    if x <= 0.0:
        duration = math.inf
    else:
        target = strategy.frontier(x)
        if r_start < target * (1.0 - 1e-12) - 1e-15:
            raise RegionError(f"R = {r_start:.6g} lies below the frontier {target:.6g} at x = {x:.6g}")
        arg = 1.0 - max(r_start - target, 0.0) * r / ((1.0 - al) * c0)
        duration = -((1.0 - al) / r) * math.log(arg) if arg > 0.0 else math.inf
    return ConsumptionSegment(start, duration, x, r_start, c0, price0, r, al)


def consumption_segment(x: float, r_start: float, surface: ValueSurface) -> ConsumptionSegment:
    """Consumption from (x, r_start) until the frontier is reached.

    ``duration`` is infinite at x = 0 (the Hotelling tail) and when reserves
    would never run down to R*(x).
    """
    return _segment(_Strategy(surface), float(x), float(r_start), 0.0)


def _episode(strategy: _Strategy, x: float, R: float, rng, time: float) -> PathEvent:
    p = strategy.params
    x_before, r_before = x, R
    price_before = strategy.price(x, R)
    finds = 0
    draws = []
    while True:
        s = rng.spacing(p.lam)
        draws.append(s)
        if s < x:
            x -= s
            finds += 1
            R = r_before + p.a * finds
            if R > strategy.frontier(x):
                break
        else:
            x = 0.0
            break
    kind = EXHAUSTION if x == 0.0 else EXPLORATION_EPISODE
    price_after = strategy.price(x, R)
    cost = p.k * (x_before - x) * math.exp(-p.r * time)
    return PathEvent(kind, time, x_before, x, r_before, R, finds, price_before, price_after, cost, tuple(draws))


def exploration_episode(x: float, R: float, surface: ValueSurface, rng, time: float = 0.0) -> PathEvent:
    """One zero-time exploration episode starting in the exploration region.

    ``rng`` needs a ``spacing(lam)`` method (see :class:`RngStream`).
    """
    if x <= 0.0:
        raise DomainError("an exploration episode needs unexplored area x > 0")
    strategy = _Strategy(surface)
    return _episode(strategy, float(x), float(R), rng, time)


def simulate_path(
    x0: float,
    r0: float,
    surface: ValueSurface,
    seed: int,
    horizon: float,
    *,
    stream_id: int = 0,
    frontier_scale: float = 1.0,
) -> Path:
    """Run the bang-bang strategy from (x0, r0) up to ``horizon``.

    ``frontier_scale`` other than 1 simulates a mis-specified strategy that
    explores below ``frontier_scale * R*(x)``; it exists for negative
    controls of the statistical tests.
    """
    if horizon <= 0:
        raise DomainError("horizon must be positive")
    if x0 < 0 or r0 < 0:
        raise DomainError("initial state must be non-negative")
    solver._check_x(surface, x0)
    strategy = _Strategy(surface, frontier_scale)
    rng = RngStream(seed, stream_id)
    x, R, t = float(x0), float(r0), 0.0
    events, segments = [], []
    exhaustion_time = None
    if x > 0.0 and R <= strategy.frontier(x):
        ev = _episode(strategy, x, R, rng, t)
        events.append(ev)
        x, R = ev.x_after, ev.r_after
        if ev.kind == EXHAUSTION:
            exhaustion_time = t
    while True:
        seg = _segment(strategy, x, R, t)
        segments.append(seg)
        if seg.end > horizon:
            break
        t = seg.end
        # land exactly on the frontier; the closed form leaves round-off only
        R = strategy.frontier(x)
        ev = _episode(strategy, x, R, rng, t)
        events.append(ev)
        x, R = ev.x_after, ev.r_after
        if ev.kind == EXHAUSTION:
            exhaustion_time = t
    return Path(surface.params, int(seed), int(stream_id), float(x0), float(r0), float(horizon),
                tuple(events), tuple(segments), exhaustion_time)


@dataclass(frozen=True)
class SampledSeries:
    """Path quantities on a time grid (right-continuous at event times)."""

    times: np.ndarray
    price: np.ndarray
    reserves: np.ndarray
    explored_area: np.ndarray
    consumption_rate: np.ndarray
    exhausted: np.ndarray = field(default=None)


def sample_path(path: Path, times) -> SampledSeries:
    """Evaluate a path on ``times`` (all within [0, horizon])."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1:
        raise DomainError("times must be one-dimensional")
    if np.any(t < 0) or np.any(t > path.horizon * (1.0 + 1e-12)):
        raise TimeOutOfRange(f"sample times must lie in [0, {path.horizon}]")
    starts = np.array([s.start for s in path.consumption_segments])
    idx = np.searchsorted(starts, t, side="right") - 1
    idx = np.maximum(idx, 0)
    price = np.empty_like(t)
    reserves = np.empty_like(t)
    cons = np.empty_like(t)
    explored = np.empty_like(t)
    for k in np.unique(idx):
        seg = path.consumption_segments[k]
        sel = idx == k
        price[sel] = seg.price(t[sel])
        reserves[sel] = seg.reserves(t[sel])
        cons[sel] = seg.consumption(t[sel])
        explored[sel] = path.x0 - seg.x
    exhausted = np.zeros(t.shape, dtype=bool)
    if path.exhaustion_time is not None:
        exhausted = t >= path.exhaustion_time
    return SampledSeries(t, price, reserves, explored, cons, exhausted)
